//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::Arc;

use gridform::controls::{
    controller_rhs, hac_angle_term_measured, steady_control_state, ControlConfig, ControlState, Measurements,
    Strategy,
};
use gridform::converter::ConverterParams;
use gridform::numerics::frames::phase_amplitude;
use gridform::numerics::{integrate_observed, IntegratorConfig, StateLayout, StateVector};
use gridform::scenarios::{ScenarioSpec, SimResult, SweepPoint};

pub const W0: f64 = TAU * 50.0;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario(name: &str) -> ScenarioSpec {
    ScenarioSpec::load(&repo_root().join("scenarios").join(name)).unwrap()
}

/// Value of sweep axis `axis` at a point.
pub fn label<'a>(p: &'a SweepPoint, axis: &str) -> &'a str {
    p.labels.iter().find(|l| l.0 == axis).map(|l| l.1.as_str()).unwrap()
}

pub fn ok(p: &SweepPoint) -> &SimResult {
    p.result.as_ref().unwrap_or_else(|e| panic!("point {} failed: {e}", p.index))
}

/// Nadir of one device (rad/s).
pub fn nadir(r: &SimResult, device: &str) -> f64 {
    r.metrics.device(device).unwrap().nadir
}

pub fn rocof(r: &SimResult, device: &str) -> f64 {
    r.metrics.device(device).unwrap().rocof
}

/// Damped pendulum with forcing: smooth, nonlinear, no closed form.
fn pendulum(t: f64, x: &[f64], dx: &mut [f64]) {
    dx[0] = x[1];
    dx[1] = -0.3 * x[1] - 4.0 * x[0].sin() + 0.5 * (1.3 * t).cos();
}

fn pendulum_end(h: f64) -> [f64; 2] {
    let mut l = StateLayout::new();
    l.register("p", "x", 2).unwrap();
    let x0 = StateVector::from_values(Arc::new(l), vec![1.2, 0.0]).unwrap();
    let cfg = IntegratorConfig::new(h, 2.0, usize::MAX).unwrap();
    let end = integrate_observed(pendulum, &x0, &cfg, |_, _| {}).unwrap();
    [end.values[0], end.values[1]]
}

/// Empirical order from errors at h and h/2 against an h/8 reference.
pub fn rk4_order() -> f64 {
    let h = 0.05;
    let reference = pendulum_end(h / 8.0);
    let err = |x: [f64; 2]| ((x[0] - reference[0]).powi(2) + (x[1] - reference[1]).powi(2)).sqrt();
    let e1 = err(pendulum_end(h));
    let e2 = err(pendulum_end(h / 2.0));
    // the h/8 reference still carries (1/8)^4 of e1; remove it
    let c = 1.0 / 4096.0;
    ((e1 - c * e1) / (e2 - c * e1)).log2()
}

fn phase_voltages(amplitude: f64, angle: f64) -> [f64; 3] {
    [
        amplitude * angle.cos(),
        amplitude * (angle - TAU / 3.0).cos(),
        amplitude * (angle + TAU / 3.0).cos(),
    ]
}

/// Largest |measured − ideal| angle term over the 100×100 non-antipodal
/// grid, LPF bypassed.
pub fn eq6_worst() -> f64 {
    let vr_ph = phase_amplitude(1000.0);
    let mut worst = 0.0f64;
    for i in 0..100 {
        for j in 0..100 {
            let delta = -PI + (i as f64 + 0.5) * TAU / 100.0;
            let delta_r = -PI + (j as f64 + 0.5) * TAU / 100.0;
            if (delta - delta_r).abs() >= PI - 0.1 {
                continue;
            }
            let theta_c = 0.7 + 0.01 * i as f64;
            let v = phase_voltages(vr_ph, theta_c - delta);
            let mut lpf = [0.0; 2];
            let got = hac_angle_term_measured(v, vr_ph, theta_c, delta_r, &mut lpf, None, 1e-5);
            worst = worst.max((got + ((delta - delta_r) / 2.0).sin()).abs());
        }
    }
    worst
}

/// |ω_c − ω_0| of each strategy at its reference point.
pub fn equilibrium_errors() -> Vec<(&'static str, f64)> {
    let c = ConverterParams::aggregated_100mva();
    let (v_r, v_dc) = (1000.0, 2440.0);
    let mut droop = ControlConfig::droop(W0, v_r);
    droop.p_r = 0.55;
    let mut hac_ideal = ControlConfig::hac(W0, v_r, v_dc);
    if let Strategy::Hac { measured, .. } = &mut hac_ideal.strategy {
        *measured = false;
    }
    let theta_c = 0.9;
    [
        ("droop", droop),
        ("matching", ControlConfig::matching(W0, v_r, v_dc)),
        ("hac", ControlConfig::hac(W0, v_r, v_dc)),
        ("hac-ideal", hac_ideal),
    ]
    .into_iter()
    .map(|(name, cfg)| {
        let delta_r = match cfg.strategy {
            Strategy::Hac { delta_r, .. } => delta_r,
            _ => 0.0,
        };
        let phi = theta_c - delta_r;
        let v = [v_r * phi.cos(), v_r * phi.sin()];
        let i_mag = 0.55 * c.s_rated / v_r;
        let i = [i_mag * phi.cos(), i_mag * phi.sin()];
        let m = Measurements {
            v_dc,
            v,
            i_s: i,
            i_grid: i,
        };
        let mut x = steady_control_state(&cfg, &c, &m, [v_r * theta_c.cos(), v_r * theta_c.sin()]).unwrap();
        x.theta_c = theta_c;
        let mut dx = ControlState::default();
        (name, (controller_rhs(&cfg, &c, &x, &m, &mut dx).omega_c - W0).abs())
    })
    .collect()
}
