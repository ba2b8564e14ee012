//! Frequency-performance metrics and run classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest under-frequency excursion `max(ω_0 − ω(t))`, clamped at zero.
pub fn nadir(freq: &[f64], omega_0: f64) -> Result<f64> {
    if freq.is_empty() {
        return Err(Error::Usage("nadir of an empty channel".into()));
    }
    Ok(freq.iter().fold(0.0f64, |m, w| m.max(omega_0 - w)))
}

/// Linear interpolation of a sampled channel; `None` outside the samples.
pub fn sample_at(times: &[f64], values: &[f64], t: f64) -> Option<f64> {
    let n = times.len().min(values.len());
    if n == 0 || t < times[0] || t > times[n - 1] {
        return None;
    }
    let k = times[..n].partition_point(|&s| s <= t);
    if k == n {
        return Some(values[n - 1]);
    }
    if k == 0 {
        return Some(values[0]);
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let (v0, v1) = (values[k - 1], values[k]);
    if t1 == t0 {
        return Some(v1);
    }
    Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
}

/// `|ω(t0 + Δt) − ω(t0)| / Δt` with linear interpolation between records.
pub fn rocof(times: &[f64], freq: &[f64], t0: f64, delta_t: f64) -> Result<f64> {
    if !(delta_t > 0.0) {
        return Err(Error::Usage(format!("RoCoF window must be positive, got {delta_t}")));
    }
    let w = |t: f64| {
        sample_at(times, freq, t).ok_or_else(|| {
            Error::Usage(format!("RoCoF window [{t0}, {}] leaves the channel", t0 + delta_t))
        })
    };
    Ok((w(t0 + delta_t)? - w(t0)?).abs() / delta_t)
}

/// Mean of a channel over `[t_start, t_end]` (samples inside the window).
pub fn window_mean(times: &[f64], values: &[f64], t_start: f64, t_end: f64) -> Result<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for (t, v) in times.iter().zip(values) {
        if *t >= t_start && *t <= t_end {
            s += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Usage(format!("no samples in window [{t_start}, {t_end}]")));
    }
    Ok(s / n as f64)
}

/// Largest pairwise difference of window-averaged power channels (pu).
pub fn sharing_error(times: &[f64], powers: &[&[f64]], t_start: f64, t_end: f64) -> Result<f64> {
    if powers.len() < 2 {
        return Err(Error::Usage("load sharing needs at least two power channels".into()));
    }
    let means = powers
        .iter()
        .map(|p| window_mean(times, p, t_start, t_end))
        .collect::<Result<Vec<_>>>()?;
    let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Share of the post-event window a channel must end inside its band for.
pub const MIN_SETTLED_TAIL: f64 = 0.1;

/// Time after `t_event` from which every channel stays within `band(c)` of
/// its final value. `None` if a channel only enters the band during the last
/// [`MIN_SETTLED_TAIL`] of the post-event window; a sustained oscillation
/// always sits near its final sample just before the end.
pub fn settling_time(
    times: &[f64],
    channels: &[&[f64]],
    t_event: f64,
    band: impl Fn(usize) -> f64,
) -> Option<f64> {
    let mut t_settle = t_event;
    for (c, ch) in channels.iter().enumerate() {
        let fin = *ch.last()?;
        let b = band(c);
        let last_out = times
            .iter()
            .zip(ch.iter())
            .rposition(|(t, v)| *t >= t_event && (v - fin).abs() > b || !v.is_finite());
        if let Some(k) = last_out {
            if k + 1 >= times.len().min(ch.len()) {
                return None;
            }
            t_settle = t_settle.max(times[k + 1]);
        }
    }
    let t_end = *times.last()?;
    if t_settle > t_end - MIN_SETTLED_TAIL * (t_end - t_event) {
        return None;
    }
    Some(t_settle - t_event)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityFlag {
    Settled,
    Oscillatory,
    Diverged,
}

impl StabilityFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityFlag::Settled => "settled",
            StabilityFlag::Oscillatory => "oscillatory",
            StabilityFlag::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityThresholds {
    /// Collapse when any dc voltage falls below this fraction of its reference.
    pub v_dc_min_frac: f64,
    /// Collapse when a frequency stays this far (Hz) from nominal ...
    pub freq_dev_max_hz: f64,
    /// ... for at least this long (s).
    pub sustain_s: f64,
    /// Trailing fraction of the horizon inspected for settling.
    pub trailing_frac: f64,
    /// Peak-to-peak frequency band for "settled" (Hz).
    pub freq_band_hz: f64,
    /// Peak-to-peak dc-voltage band for "settled" (fraction of reference).
    pub v_dc_band_frac: f64,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self {
            v_dc_min_frac: 0.5,
            freq_dev_max_hz: 5.0,
            sustain_s: 0.1,
            trailing_frac: 0.2,
            freq_band_hz: 0.01,
            v_dc_band_frac: 0.005,
        }
    }
}

/// Channels inspected by [`classify_stability`]; all share `times`.
pub struct StabilityInput<'a> {
    pub times: &'a [f64],
    /// Frequencies (rad/s).
    pub freq: Vec<&'a [f64]>,
    /// dc voltages with their references (V).
    pub v_dc: Vec<(&'a [f64], f64)>,
    pub omega_0: f64,
}

pub fn classify_stability(input: &StabilityInput, th: &StabilityThresholds) -> StabilityFlag {
    let times = input.times;
    let Some(&t_end) = times.last() else {
        return StabilityFlag::Settled;
    };
    let all_finite = input.freq.iter().all(|c| c.iter().all(|v| v.is_finite()))
        && input.v_dc.iter().all(|(c, _)| c.iter().all(|v| v.is_finite()));
    if !all_finite {
        return StabilityFlag::Diverged;
    }
    if input
        .v_dc
        .iter()
        .any(|(c, r)| c.iter().any(|v| *v < th.v_dc_min_frac * r))
    {
        return StabilityFlag::Diverged;
    }
    let dev_max = std::f64::consts::TAU * th.freq_dev_max_hz;
    for c in &input.freq {
        let mut since: Option<f64> = None;
        for (t, w) in times.iter().zip(c.iter()) {
            if (w - input.omega_0).abs() > dev_max {
                let s = *since.get_or_insert(*t);
                if t - s >= th.sustain_s {
                    return StabilityFlag::Diverged;
                }
            } else {
                since = None;
            }
        }
    }
    let t_from = t_end - th.trailing_frac * (t_end - times[0]);
    let k0 = times.partition_point(|&t| t < t_from);
    let pk = |c: &[f64]| {
        let tail = &c[k0.min(c.len())..];
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        if tail.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    let band = std::f64::consts::TAU * th.freq_band_hz;
    let freq_ok = input.freq.iter().all(|c| pk(c) <= band);
    let vdc_ok = input.v_dc.iter().all(|(c, r)| pk(c) <= th.v_dc_band_frac * r);
    if freq_ok && vdc_ok {
        StabilityFlag::Settled
    } else {
        StabilityFlag::Oscillatory
    }
}

/// Per-device frequency metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub device: String,
    /// rad/s
    pub nadir: f64,
    /// rad/s²
    pub rocof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Largest nadir over all devices (rad/s).
    pub max_freq_deviation: f64,
    /// Largest RoCoF over all devices (rad/s²).
    pub rocof: f64,
    pub rocof_t0: f64,
    pub rocof_delta_t: f64,
    /// Seconds after the event; `None` when not settled within the horizon.
    pub settling_time: Option<f64>,
    /// Among converters, pu of rating; `None` with fewer than two converters.
    pub sharing_error: Option<f64>,
    pub stability: StabilityFlag,
    pub devices: Vec<DeviceMetrics>,
}

impl MetricsReport {
    pub fn max_freq_deviation_hz(&self) -> f64 {
        self.max_freq_deviation / std::f64::consts::TAU
    }

    pub fn rocof_hz_s(&self) -> f64 {
        self.rocof / std::f64::consts::TAU
    }

    pub fn device(&self, id: &str) -> Option<&DeviceMetrics> {
        self.devices.iter().find(|d| d.device == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    const W0: f64 = TAU * 50.0;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    #[test]
    fn nadir_examples() {
        assert_eq!(nadir(&[W0; 10], W0).unwrap(), 0.0);
        let t = grid(10_000, TAU);
        let w: Vec<f64> = t.iter().map(|t| W0 - TAU * 0.3 * t.sin()).collect();
        assert!((nadir(&w, W0).unwrap() / TAU - 0.3).abs() < 1e-9);
        let above: Vec<f64> = t.iter().map(|t| W0 + 1.0 + t).collect();
        assert_eq!(nadir(&above, W0).unwrap(), 0.0);
        assert!(matches!(nadir(&[], W0), Err(Error::Usage(_))));
    }

    #[test]
    fn rocof_examples() {
        let t = grid(1000, 2.0);
        let ramp: Vec<f64> = t.iter().map(|t| W0 - TAU * 0.5 * t).collect();
        for t0 in [0.0, 0.333, 1.0, 1.85] {
            let r = rocof(&t, &ramp, t0, 0.15).unwrap();
            assert!((r / TAU - 0.5).abs() < 1e-9);
        }
        assert_eq!(rocof(&t, &vec![W0; t.len()], 0.2, 0.15).unwrap(), 0.0);
        assert!(matches!(rocof(&t, &ramp, 1.9, 0.15), Err(Error::Usage(_))));
        assert!(matches!(rocof(&t, &ramp, 0.5, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn sharing_examples() {
        let t = grid(100, 1.0);
        let a = vec![0.7; t.len()];
        let b: Vec<f64> = vec![0.75; t.len()];
        assert_eq!(sharing_error(&t, &[&a, &a, &a], 0.5, 1.0).unwrap(), 0.0);
        assert!((sharing_error(&t, &[&a, &b], 0.5, 1.0).unwrap() - 0.05).abs() < 1e-12);
        assert!(matches!(sharing_error(&t, &[&a], 0.5, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn classification_examples() {
        let t = grid(5000, 5.0);
        let flat = vec![W0; t.len()];
        let vdc = vec![2440.0; t.len()];
        let th = StabilityThresholds::default();
        let input = |f: &'_ [f64], v: &'_ [f64]| -> StabilityFlag {
            let inp = StabilityInput {
                times: &t,
                freq: vec![f],
                v_dc: vec![(v, 2440.0)],
                omega_0: W0,
            };
            classify_stability(&inp, &th)
        };
        assert_eq!(input(&flat, &vdc), StabilityFlag::Settled);
        let osc: Vec<f64> = t.iter().map(|t| W0 + TAU * 0.2 * (TAU * 1.3 * t).sin()).collect();
        assert_eq!(input(&osc, &vdc), StabilityFlag::Oscillatory);
        let collapse: Vec<f64> = t.iter().map(|t| 2440.0 * (1.0 - 0.2 * t)).collect();
        assert_eq!(input(&flat, &collapse), StabilityFlag::Diverged);
        let runaway: Vec<f64> = t.iter().map(|t| W0 - TAU * 3.0 * t).collect();
        assert_eq!(input(&runaway, &vdc), StabilityFlag::Diverged);
        let mut nan = flat.clone();
        nan[100] = f64::NAN;
        assert_eq!(input(&nan, &vdc), StabilityFlag::Diverged);
    }

    #[test]
    fn settling_time_of_first_order_decay() {
        let t = grid(10_000, 5.0);
        let y: Vec<f64> = t
            .iter()
            .map(|t| if *t < 1.0 { 0.0 } else { 1.0 - (-(t - 1.0) / 0.1).exp() })
            .collect();
        let ts = settling_time(&t, &[&y], 1.0, |_| 0.02).unwrap();
        // e^{-ts/τ} = 0.02
        assert!((ts - 0.1 * 50f64.ln()).abs() < 1e-3, "{ts}");
        let osc: Vec<f64> = t.iter().map(|t| (TAU * t).sin()).collect();
        assert_eq!(settling_time(&t, &[&osc], 0.0, |_| 0.01), None);
    }

    proptest! {
        #[test]
        fn nadir_is_shift_invariant(shift in 0usize..50, amp in 0.0f64..2.0, ph in -PI..PI) {
            let w: Vec<f64> = (0..200).map(|k| W0 - amp * (0.1 * k as f64 + ph).sin()).collect();
            let mut shifted = vec![W0; shift];
            shifted.extend_from_slice(&w);
            prop_assert_eq!(nadir(&w, W0).unwrap(), nadir(&shifted, W0).unwrap());
        }

        #[test]
        fn rocof_is_exact_on_piecewise_linear(
            a in -5.0f64..5.0, b in -5.0f64..5.0, t0 in 0.0f64..0.8, dt in 0.01f64..0.2
        ) {
            // two linear pieces meeting at t = 0.5 on a coarse grid
            let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
            let f = |t: f64| if t <= 0.5 { a * t } else { a * 0.5 + b * (t - 0.5) };
            let w: Vec<f64> = t.iter().map(|&t| f(t)).collect();
            let r = rocof(&t, &w, t0, dt).unwrap();
            prop_assert!((r - (f(t0 + dt) - f(t0)).abs() / dt).abs() < 1e-9);
        }

        #[test]
        fn loosening_thresholds_never_diverges_a_settled_run(
            amp in 0.0f64..0.5, decay in 0.1f64..5.0, scale in 1.0f64..4.0
        ) {
            let t = grid(2000, 5.0);
            let f: Vec<f64> = t.iter().map(|t| W0 - amp * (-decay * t).exp() * (7.0 * t).sin()).collect();
            let v = vec![2440.0; t.len()];
            let inp = StabilityInput { times: &t, freq: vec![&f], v_dc: vec![(&v, 2440.0)], omega_0: W0 };
            let tight = StabilityThresholds::default();
            let loose = StabilityThresholds {
                v_dc_min_frac: tight.v_dc_min_frac / scale,
                freq_dev_max_hz: tight.freq_dev_max_hz * scale,
                sustain_s: tight.sustain_s * scale,
                freq_band_hz: tight.freq_band_hz * scale,
                v_dc_band_frac: tight.v_dc_band_frac * scale,
                ..tight
            };
            if classify_stability(&inp, &tight) == StabilityFlag::Settled {
                prop_assert_eq!(classify_stability(&inp, &loose), StabilityFlag::Settled);
            }
        }
    }
}
