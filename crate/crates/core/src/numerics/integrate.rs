//! Classical fixed-step fourth-order Runge–Kutta.
//!
//! Time points are computed as `n * h` rather than accumulated, so a run is a
//! pure function of its inputs and repeated runs are bit-identical.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, IntegrationError, Result};
use crate::numerics::state::{StateLayout, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Step size in seconds.
    pub step_h: f64,
    /// Final time in seconds (integration starts at 0).
    pub t_end: f64,
    /// Keep one sample out of every `record_every` steps.
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn new(step_h: f64, t_end: f64, record_every: usize) -> Result<Self> {
        let cfg = Self {
            step_h,
            t_end,
            record_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_h > 0.0) || !self.step_h.is_finite() {
            return Err(Error::Parameter(format!(
                "step_h must be positive, got {}",
                self.step_h
            )));
        }
        if !(self.t_end >= self.step_h) {
            return Err(Error::Parameter(format!(
                "t_end ({}) must be at least one step ({})",
                self.t_end, self.step_h
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps; `t_end` is rounded to the step grid.
    pub fn steps(&self) -> usize {
        (self.t_end / self.step_h).round() as usize
    }
}

/// Decimated samples of an integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub layout: Arc<StateLayout>,
    /// Derived signals, one value per recorded time.
    pub channels: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_at(&self, k: usize) -> StateVector {
        StateVector {
            values: self.samples[k].clone(),
            layout: self.layout.clone(),
        }
    }

    /// Time series of one component of one named slice.
    pub fn series(&self, device: &str, slice: &str, component: usize) -> Result<Vec<f64>> {
        let r = self.layout.range(device, slice)?;
        if component >= r.len() {
            return Err(Error::Usage(format!(
                "component {component} out of range for `{device}.{slice}`"
            )));
        }
        Ok(self.samples.iter().map(|s| s[r.start + component]).collect())
    }

    pub fn final_state(&self) -> Option<StateVector> {
        self.samples.last().map(|s| StateVector {
            values: s.clone(),
            layout: self.layout.clone(),
        })
    }
}

/// Reusable RK4 stage buffers.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `x` from `t` to `t + h` in place.
    pub fn step<F>(
        &mut self,
        rhs: &mut F,
        t: f64,
        h: f64,
        x: &mut [f64],
        layout: &StateLayout,
    ) -> Result<(), IntegrationError>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = x.len();
        rhs(t, x, &mut self.k1);
        check_finite(&self.k1, t, layout)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2);
        check_finite(&self.k2, t + 0.5 * h, layout)?;
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3);
        check_finite(&self.k3, t + 0.5 * h, layout)?;
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        check_finite(&self.k4, t + h, layout)?;
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(dx: &[f64], t: f64, layout: &StateLayout) -> Result<(), IntegrationError> {
    if dx.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let index = dx.iter().position(|v| !v.is_finite()).unwrap_or(0);
    let (device, slice) = layout
        .locate(index)
        .map(|e| (e.device.clone(), e.name.clone()))
        .unwrap_or_else(|| ("?".into(), "?".into()));
    Err(IntegrationError {
        t,
        device,
        slice,
        index,
    })
}

/// Integrates and calls `observer(t, x)` at every recorded time (including
/// `t = 0` and the final time). Returns the final state.
pub fn integrate_observed<F, O>(
    mut rhs: F,
    x0: &StateVector,
    cfg: &IntegratorConfig,
    mut observer: O,
) -> Result<StateVector>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    cfg.validate()?;
    let layout = x0.layout.clone();
    let mut x = x0.values.clone();
    let mut rk = Rk4::new(x.len());
    let steps = cfg.steps();
    observer(0.0, &x);
    for n in 0..steps {
        let t = n as f64 * cfg.step_h;
        rk.step(&mut rhs, t, cfg.step_h, &mut x, &layout)?;
        let done = n + 1;
        if done % cfg.record_every == 0 || done == steps {
            observer(done as f64 * cfg.step_h, &x);
        }
    }
    Ok(StateVector { values: x, layout })
}

/// Integrates `dx/dt = rhs(t, x)` from `x0` and returns the decimated trajectory.
pub fn integrate<F>(rhs: F, x0: &StateVector, cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut times = Vec::new();
    let mut samples = Vec::new();
    integrate_observed(rhs, x0, cfg, |t, x| {
        times.push(t);
        samples.push(x.to_vec());
    })?;
    Ok(Trajectory {
        times,
        samples,
        layout: x0.layout.clone(),
        channels: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> StateVector {
        let mut l = StateLayout::new();
        l.register("test", "x", 1).unwrap();
        StateVector::from_values(Arc::new(l), vec![v]).unwrap()
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let x0 = scalar(3.25);
        let cfg = IntegratorConfig::new(0.1, 2.0, 1).unwrap();
        let tr = integrate(|_, _, dx| dx[0] = 0.0, &x0, &cfg).unwrap();
        assert!(tr.samples.iter().all(|s| s[0] == 3.25));
        assert_eq!(tr.times.len(), 21);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let x0 = scalar(1.0);
        let cfg = IntegratorConfig::new(1e-3, 1.0, 100).unwrap();
        let tr = integrate(|_, x, dx| dx[0] = -x[0], &x0, &cfg).unwrap();
        let end = tr.samples.last().unwrap()[0];
        assert!((end - (-1.0f64).exp()).abs() < 1e-9);
        assert!((tr.times.last().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decimation_keeps_final_sample() {
        let x0 = scalar(0.0);
        let cfg = IntegratorConfig::new(0.1, 1.05, 4).unwrap();
        let tr = integrate(|_, _, dx| dx[0] = 1.0, &x0, &cfg).unwrap();
        // 11 steps (rounded), samples at 0, 4, 8, 11
        assert_eq!(tr.times.len(), 4);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn non_finite_derivative_names_the_slice() {
        let mut l = StateLayout::new();
        l.register("gen", "omega", 1).unwrap();
        l.register("gfc2", "vdc", 1).unwrap();
        let x0 = StateVector::zeros(Arc::new(l));
        let cfg = IntegratorConfig::new(0.01, 1.0, 1).unwrap();
        let err = integrate(
            |t, _, dx| {
                dx[0] = 0.0;
                dx[1] = if t > 0.5 { f64::NAN } else { 1.0 };
            },
            &x0,
            &cfg,
        )
        .unwrap_err();
        match err {
            Error::Integration(e) => {
                assert_eq!(e.device, "gfc2");
                assert_eq!(e.slice, "vdc");
                assert!(e.t > 0.5 && e.t < 0.52);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_config_rejected() {
        assert!(IntegratorConfig::new(0.0, 1.0, 1).is_err());
        assert!(IntegratorConfig::new(0.1, 0.05, 1).is_err());
        assert!(IntegratorConfig::new(0.1, 1.0, 0).is_err());
    }
}
