//! Running scenarios: settling phase, event run, metrics, sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{
    classify_stability, nadir, rocof, settling_time, sharing_error, DeviceMetrics, MetricsReport,
    StabilityFlag, StabilityInput,
};
use crate::numerics::Rk4;

use super::spec::{Lpf, ScenarioSpec, StrategyKind, UnitKind};
use super::system::{build_system, Built, DeviceSignals, InitPoint, SIGNAL_NAMES};

/// One recorded signal of one device.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub device: String,
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Largest |ω − ω_0| / ω_0 over devices at the end of settling.
    pub settle_residual_pu: f64,
    /// Largest relative switching-stage power mismatch over recorded samples.
    pub max_stage_residual: f64,
    /// Largest dc source current over converters and samples (pu).
    pub peak_i_dc_pu: f64,
    /// Set when the run stopped on a non-finite derivative.
    pub integration_error: Option<String>,
    pub init: Vec<InitPointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitPointRecord {
    pub device: String,
    pub p: f64,
    pub q: f64,
    pub i_dc: f64,
    pub delta_r: Option<f64>,
}

impl From<&InitPoint> for InitPointRecord {
    fn from(p: &InitPoint) -> Self {
        Self {
            device: p.device.clone(),
            p: p.p,
            q: p.q,
            i_dc: p.i_dc,
            delta_r: p.delta_r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// The scenario as run.
    pub spec: ScenarioSpec,
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
    pub metrics: MetricsReport,
    pub diagnostics: Diagnostics,
}

impl SimResult {
    pub fn channel(&self, device: &str, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.device == device && c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn devices(&self) -> Vec<&str> {
        let mut d: Vec<&str> = Vec::new();
        for c in &self.channels {
            if !d.contains(&c.device.as_str()) {
                d.push(&c.device);
            }
        }
        d
    }
}

/// Output decimation override read by [`run`] (steps per recorded sample).
pub const RECORD_EVERY_ENV: &str = "GRIDFORM_RECORD_EVERY";

fn record_every(spec: &ScenarioSpec) -> usize {
    std::env::var(RECORD_EVERY_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(spec.integrator.record_every)
}

/// Settle, apply events, record and evaluate.
pub fn run(spec: &ScenarioSpec) -> Result<SimResult> {
    let built = build_system(spec)?;
    run_built(spec, built)
}

fn run_built(spec: &ScenarioSpec, built: Built) -> Result<SimResult> {
    let Built {
        system,
        x0,
        g_base,
        events,
        init,
    } = built;
    let h = spec.integrator.h_s;
    let layout = x0.layout.clone();
    let mut x = x0.values;
    let mut rk = Rk4::new(x.len());
    let omega_0 = system.omega_0;

    // settling phase, events disabled
    let settle_steps = (spec.settle_s / h).round() as usize;
    for n in 0..settle_steps {
        let mut f = |_t: f64, x: &[f64], dx: &mut [f64]| system.rhs(x, &g_base, dx, None);
        rk.step(&mut f, n as f64 * h, h, &mut x, &layout)
            .map_err(|e| Error::Settle(format!("non-finite state while settling: {e}")))?;
    }
    let sig = system.signals(&x, &g_base);
    let mut worst = 0.0f64;
    let mut breakdown = Vec::new();
    for (d, s) in system.devices.iter().zip(&sig) {
        let r = (s.omega - omega_0).abs() / omega_0;
        worst = worst.max(r);
        breakdown.push(format!("{}: {:.3e} pu", d.id, r));
    }
    if !(worst <= 1e-6) {
        return Err(Error::Settle(format!(
            "frequency residual after {} s: {}",
            spec.settle_s,
            breakdown.join(", ")
        )));
    }

    let every = record_every(spec);
    let steps = (spec.horizon_s / h).round() as usize;
    let event_steps: Vec<usize> = events.iter().map(|e| (e.t_event / h).round() as usize).collect();
    let nd = system.devices.len();
    let mut times = Vec::with_capacity(steps / every + 2);
    let mut rec: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); SIGNAL_NAMES.len()]; nd];
    let mut diag = Diagnostics {
        settle_residual_pu: worst,
        init: init.iter().map(InitPointRecord::from).collect(),
        ..Default::default()
    };
    let mut g = g_base.clone();
    let mut signals = vec![DeviceSignals::default(); nd];
    let mut dx = vec![0.0; x.len()];
    let mut record = |t: f64, x: &[f64], g: &[f64], diag: &mut Diagnostics, times: &mut Vec<f64>| {
        system.rhs(x, g, &mut dx, Some(&mut signals));
        times.push(t);
        for (k, s) in signals.iter().enumerate() {
            for (c, v) in s.values().iter().enumerate() {
                rec[k][c].push(*v);
            }
            diag.max_stage_residual = diag.max_stage_residual.max(s.stage_residual);
            diag.peak_i_dc_pu = diag.peak_i_dc_pu.max(s.i_dc);
        }
    };
    let conductances = |n: usize, g: &mut Vec<f64>| {
        g.copy_from_slice(&g_base);
        for (e, &k) in events.iter().zip(&event_steps) {
            if n >= k {
                g[e.bus] += e.delta_g;
            }
        }
    };
    conductances(0, &mut g);
    record(0.0, &x, &g, &mut diag, &mut times);
    for n in 0..steps {
        conductances(n, &mut g);
        let mut f = |_t: f64, x: &[f64], dx: &mut [f64]| system.rhs(x, &g, dx, None);
        if let Err(e) = rk.step(&mut f, n as f64 * h, h, &mut x, &layout) {
            diag.integration_error = Some(e.to_string());
            break;
        }
        let done = n + 1;
        if done % every == 0 || done == steps {
            record(done as f64 * h, &x, &g, &mut diag, &mut times);
        }
    }

    let mut channels = Vec::new();
    for (k, d) in system.devices.iter().enumerate() {
        for (c, name) in SIGNAL_NAMES.iter().enumerate() {
            if !d.is_gfc() && matches!(*name, "v_dc" | "i_dc" | "mu") {
                continue;
            }
            channels.push(Channel {
                device: d.id.clone(),
                name: name.to_string(),
                values: std::mem::take(&mut rec[k][c]),
            });
        }
    }
    let v_dc_refs: Vec<(String, f64)> = system
        .devices
        .iter()
        .filter_map(|d| match &d.model {
            super::system::DeviceModel::Gfc { conv, .. } => Some((d.id.clone(), conv.v_dc_ref)),
            _ => None,
        })
        .collect();
    let metrics = evaluate(spec, &times, &channels, &v_dc_refs, omega_0, diag.integration_error.is_some())?;
    Ok(SimResult {
        spec: spec.clone(),
        times,
        channels,
        metrics,
        diagnostics: diag,
    })
}

fn evaluate(
    spec: &ScenarioSpec,
    times: &[f64],
    channels: &[Channel],
    v_dc_refs: &[(String, f64)],
    omega_0: f64,
    aborted: bool,
) -> Result<MetricsReport> {
    let find = |dev: &str, name: &str| {
        channels
            .iter()
            .find(|c| c.device == dev && c.name == name)
            .map(|c| c.values.as_slice())
    };
    let mut devs: Vec<&str> = Vec::new();
    for c in channels {
        if !devs.contains(&c.device.as_str()) {
            devs.push(&c.device);
        }
    }
    let t_event = spec.event_time();
    let t_end = *times.last().unwrap_or(&0.0);
    let window = spec.metrics.rocof_window_s;
    let k_event = times.partition_point(|&t| t < t_event);
    let mut devices = Vec::new();
    for d in &devs {
        let w = find(d, "omega").unwrap_or(&[]);
        let post = &w[k_event.min(w.len())..];
        let nad = if post.is_empty() { 0.0 } else { nadir(post, omega_0)? };
        let r = if t_event + window <= t_end {
            rocof(times, w, t_event, window)?
        } else {
            f64::NAN
        };
        devices.push(DeviceMetrics {
            device: d.to_string(),
            nadir: nad,
            rocof: r,
        });
    }
    let freqs: Vec<&[f64]> = devs.iter().filter_map(|d| find(d, "omega")).collect();
    let vdc: Vec<(&[f64], f64)> = v_dc_refs
        .iter()
        .filter_map(|(d, r)| find(d, "v_dc").map(|c| (c, *r)))
        .collect();
    let mut stability = classify_stability(
        &StabilityInput {
            times,
            freq: freqs.clone(),
            v_dc: vdc,
            omega_0,
        },
        &spec.metrics.thresholds,
    );
    if aborted {
        stability = StabilityFlag::Diverged;
    }
    let gfc_p: Vec<&[f64]> = v_dc_refs.iter().filter_map(|(d, _)| find(d, "p")).collect();
    let sharing = if gfc_p.len() >= 2 && t_end > 0.0 {
        let t0 = (t_end - spec.metrics.sharing_window_s).max(t_event);
        Some(sharing_error(times, &gfc_p, t0, t_end)?)
    } else {
        None
    };
    let band_frac = spec.metrics.settle_band_frac;
    let floor = 1e-6 * omega_0;
    let settle = if spec.events.is_empty() {
        Some(0.0)
    } else {
        settling_time(times, &freqs, t_event, |c| {
            let fin = *freqs[c].last().unwrap_or(&omega_0);
            (band_frac * (fin - omega_0).abs()).max(floor)
        })
    };
    let max_dev = devices.iter().map(|d| d.nadir).fold(0.0, f64::max);
    let max_rocof = devices.iter().map(|d| d.rocof).fold(f64::NAN, f64::max);
    Ok(MetricsReport {
        max_freq_deviation: max_dev,
        rocof: max_rocof,
        rocof_t0: t_event,
        rocof_delta_t: window,
        settling_time: settle,
        sharing_error: sharing,
        stability,
        devices,
    })
}

/// One grid point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub index: usize,
    /// (axis, value) pairs identifying the point.
    pub labels: Vec<(String, String)>,
    pub spec: ScenarioSpec,
    pub result: std::result::Result<SimResult, String>,
}

/// Axis labels of a sweep point and its concrete scenario.
pub type GridPoint = (Vec<(String, String)>, ScenarioSpec);

/// Expand the sweep grid into concrete scenarios, in grid order.
pub fn expand_sweep(spec: &ScenarioSpec) -> Result<Vec<GridPoint>> {
    let sw = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Usage("scenario has no [sweep] table".into()))?;
    let mut points: Vec<GridPoint> = vec![(Vec::new(), spec.clone())];
    fn axis<T: Copy>(
        points: Vec<GridPoint>,
        values: &[T],
        name: &str,
        label: impl Fn(T) -> String,
        apply: impl Fn(&mut ScenarioSpec, T),
    ) -> Vec<GridPoint> {
        if values.is_empty() {
            return points;
        }
        let mut out = Vec::with_capacity(points.len() * values.len());
        for (labels, s) in points {
            for &v in values {
                let mut l = labels.clone();
                l.push((name.to_string(), label(v)));
                let mut s2 = s.clone();
                apply(&mut s2, v);
                out.push((l, s2));
            }
        }
        out
    }
    points = axis(points, &sw.strategy, "strategy", |s: StrategyKind| s.as_str().into(), |s, v| {
        for u in s.units.iter_mut().filter(|u| u.kind == UnitKind::Gfc) {
            u.strategy = Some(v);
        }
    });
    points = axis(points, &sw.delta_p_mw, "delta_p_mw", |v: f64| format!("{v}"), |s, v| {
        s.events[0].delta_p_mw = v;
    });
    points = axis(points, &sw.lpf_hz, "lpf_hz", |v: Lpf| v.label(), |s, v| {
        for u in s.units.iter_mut().filter(|u| u.kind == UnitKind::Gfc) {
            u.lpf_hz = Some(v);
        }
    });
    points = axis(points, &sw.pss, "pss", |v: bool| format!("{v}"), |s, v| s.pss = v);
    if points.len() == 1 && points[0].0.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    for (_, s) in points.iter_mut() {
        s.sweep = None;
    }
    Ok(points)
}

/// Run every grid point (in parallel); failures are recorded per point.
pub fn sweep(spec: &ScenarioSpec) -> Result<Vec<SweepPoint>> {
    let points = expand_sweep(spec)?;
    Ok(points
        .into_par_iter()
        .enumerate()
        .map(|(index, (labels, s))| {
            let result = run(&s).map_err(|e| e.to_string());
            SweepPoint {
                index,
                labels,
                spec: s,
                result,
            }
        })
        .collect())
}
