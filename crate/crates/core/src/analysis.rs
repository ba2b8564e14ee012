//! Reduced two-converter model under hybrid angle control, with the energy
//! function used to certify convergence numerically.
//!
//! Both converters see each other through one merged RL element whose
//! inductance is neglected (quasi-steady line), the dc sources are pure
//! proportional controllers and the modulation magnitudes are constant.
//! Only the relative angle `δ = θ₁ − θ₂` matters, so converter 2 is placed
//! at angle zero.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::modulation_vector;
use crate::error::{Error, Result};
use crate::numerics::{Rk4, StateLayout, Vec2};

/// Per-converter data of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterSide {
    /// (rad/s)/V
    pub gamma_dc: f64,
    /// rad/s
    pub gamma_ac: f64,
    /// F
    pub c_dc: f64,
    /// S
    pub g_dc: f64,
    /// A/V
    pub kappa_dc: f64,
    /// V
    pub v_dc_ref: f64,
    /// Fixed modulation magnitude.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoConverterParams {
    pub sides: [ConverterSide; 2],
    /// Merged filter and line resistance (Ω).
    pub r: f64,
    /// Relative angle reference (rad).
    pub delta_r: f64,
    /// rad/s
    pub omega_0: f64,
}

impl TwoConverterParams {
    /// Aggregated 100 MVA converters with the table gains, linked through
    /// 0.05 Ω: about 80 times the reactance of the two filter inductors at
    /// 50 Hz, so the quasi-steady line holds.
    ///
    /// `G_dc = 0` and `δ_r = 0` make the references an exact equilibrium; see
    /// [`TwoConverterParams::reference_residual`].
    pub fn table_scaled() -> Self {
        let omega_0 = 2.0 * std::f64::consts::PI * 50.0;
        let v = 2440.0;
        let side = ConverterSide {
            gamma_dc: 0.01 * omega_0 / v,
            gamma_ac: 205.0,
            c_dc: 1.6,
            g_dc: 0.0,
            kappa_dc: 1.6e3,
            v_dc_ref: v,
            mu: 0.4,
        };
        Self {
            sides: [side, side],
            r: 0.05,
            delta_r: 0.0,
            omega_0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::Parameter(format!("line resistance must be positive, got {}", self.r)));
        }
        for (j, s) in self.sides.iter().enumerate() {
            let checks = [
                ("mu", s.mu > 0.0),
                ("c_dc", s.c_dc > 0.0),
                ("g_dc", s.g_dc >= 0.0),
                ("kappa_dc", s.kappa_dc >= 0.0),
                ("gamma_ac", s.gamma_ac >= 0.0),
                ("v_dc_ref", s.v_dc_ref > 0.0),
            ];
            for (name, ok) in checks {
                if !ok {
                    return Err(Error::Parameter(format!("converter {}: `{name}` out of range", j + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> TwoConverterState {
        TwoConverterState {
            v_dc_1: self.sides[0].v_dc_ref,
            v_dc_2: self.sides[1].v_dc_ref,
            delta: self.delta_r,
        }
    }

    /// Largest derivative component at the references. Zero when the
    /// references are an equilibrium, which needs `G_dc = 0`, `δ_r = 0` and
    /// `μ₁ v_r1 = μ₂ v_r2`.
    pub fn reference_residual(&self) -> f64 {
        two_converter_rhs(&self.reference(), self).max_abs()
    }

    pub fn gamma_ac_sum(&self) -> f64 {
        self.sides[0].gamma_ac + self.sides[1].gamma_ac
    }

    /// Scales both ac gains so that their sum is `sum` (ratio preserved;
    /// an all-zero pair is split evenly).
    pub fn with_gamma_ac_sum(mut self, sum: f64) -> Self {
        let old = self.gamma_ac_sum();
        for s in &mut self.sides {
            s.gamma_ac = if old > 0.0 { s.gamma_ac * sum / old } else { 0.5 * sum };
        }
        self
    }

    pub fn with_kappa_dc(mut self, kappa: f64) -> Self {
        for s in &mut self.sides {
            s.kappa_dc = kappa;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoConverterState {
    /// V
    pub v_dc_1: f64,
    /// V
    pub v_dc_2: f64,
    /// θ₁ − θ₂ (rad)
    pub delta: f64,
}

impl TwoConverterState {
    pub fn to_array(&self) -> [f64; 3] {
        [self.v_dc_1, self.v_dc_2, self.delta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            v_dc_1: a[0],
            v_dc_2: a[1],
            delta: a[2],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Component-wise distance, max norm.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        (0..3).fold(0.0, |m, k| m.max((a[k] - b[k]).abs()))
    }
}

/// Quasi-steady line current (A), converter 2 at angle zero.
pub fn line_current(x: &TwoConverterState, p: &TwoConverterParams) -> Vec2 {
    let m1 = modulation_vector(p.sides[0].mu, x.delta);
    let m2 = modulation_vector(p.sides[1].mu, 0.0);
    [
        (x.v_dc_1 * m1[0] - x.v_dc_2 * m2[0]) / p.r,
        (x.v_dc_1 * m1[1] - x.v_dc_2 * m2[1]) / p.r,
    ]
}

/// Closed-loop vector field.
pub fn two_converter_rhs(x: &TwoConverterState, p: &TwoConverterParams) -> TwoConverterState {
    let [a, b] = &p.sides;
    let coupling = a.mu * b.mu * x.delta.cos() / p.r;
    let e1 = x.v_dc_1 - a.v_dc_ref;
    let e2 = x.v_dc_2 - b.v_dc_ref;
    TwoConverterState {
        v_dc_1: -(a.kappa_dc * e1 + (a.g_dc + a.mu * a.mu / p.r) * x.v_dc_1 - coupling * x.v_dc_2) / a.c_dc,
        v_dc_2: -(b.kappa_dc * e2 + (b.g_dc + b.mu * b.mu / p.r) * x.v_dc_2 - coupling * x.v_dc_1) / b.c_dc,
        delta: a.gamma_dc * e1 - b.gamma_dc * e2 - p.gamma_ac_sum() * ((x.delta - p.delta_r) / 2.0).sin(),
    }
}

/// `½ Σ C_j (v_dc,j − v_r,j)² + 2 (1 − cos((δ − δ_r)/2))`, evaluated verbatim
/// (mixed units).
pub fn energy(x: &TwoConverterState, p: &TwoConverterParams) -> f64 {
    let e1 = x.v_dc_1 - p.sides[0].v_dc_ref;
    let e2 = x.v_dc_2 - p.sides[1].v_dc_ref;
    0.5 * (p.sides[0].c_dc * e1 * e1 + p.sides[1].c_dc * e2 * e2)
        + 2.0 * (1.0 - ((x.delta - p.delta_r) / 2.0).cos())
}

/// Equilibrium near `guess` by Newton's method with the analytic Jacobian.
pub fn equilibrium(p: &TwoConverterParams, guess: TwoConverterState) -> Result<TwoConverterState> {
    p.validate()?;
    let [a, b] = &p.sides;
    let mut x = Vector3::from(guess.to_array());
    for _ in 0..50 {
        let s = TwoConverterState::from_array(x.into());
        let f = Vector3::from(two_converter_rhs(&s, p).to_array());
        let scale = 1.0 + s.v_dc_1.abs().max(s.v_dc_2.abs());
        if f.amax() < 1e-12 * scale {
            return Ok(s);
        }
        let k = a.mu * b.mu / p.r;
        let (sd, cd) = s.delta.sin_cos();
        let h = 0.5 * p.gamma_ac_sum() * ((s.delta - p.delta_r) / 2.0).cos();
        let jac = Matrix3::new(
            -(a.kappa_dc + a.g_dc + a.mu * a.mu / p.r) / a.c_dc,
            k * cd / a.c_dc,
            -k * sd * s.v_dc_2 / a.c_dc,
            k * cd / b.c_dc,
            -(b.kappa_dc + b.g_dc + b.mu * b.mu / p.r) / b.c_dc,
            -k * sd * s.v_dc_1 / b.c_dc,
            a.gamma_dc,
            -b.gamma_dc,
            -h,
        );
        let dx = jac
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::Usage("singular Jacobian in equilibrium search".into()))?;
        x += dx;
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::Usage("equilibrium search did not converge".into()))
}

/// Integration and acceptance settings of a certification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    /// s
    pub h: f64,
    /// s
    pub horizon: f64,
    /// Max-norm distance to the references counted as converged.
    pub converged_tol: f64,
    /// Allowed single-step energy increase relative to `1 + 𝒱`.
    pub uptick_rel: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            h: 1e-4,
            horizon: 10.0,
            converged_tol: 1e-6,
            uptick_rel: 1e-9,
        }
    }
}

/// Initial conditions: every angle offset combined with every pair of dc
/// errors (fractions of the respective reference).
pub fn ic_grid(p: &TwoConverterParams, angle_offsets: &[f64], dc_fracs: &[f64]) -> Vec<TwoConverterState> {
    let mut out = Vec::with_capacity(angle_offsets.len() * dc_fracs.len() * dc_fracs.len());
    for &d in angle_offsets {
        for &f1 in dc_fracs {
            for &f2 in dc_fracs {
                out.push(TwoConverterState {
                    v_dc_1: p.sides[0].v_dc_ref * (1.0 + f1),
                    v_dc_2: p.sides[1].v_dc_ref * (1.0 + f2),
                    delta: p.delta_r + d,
                });
            }
        }
    }
    out
}

pub const DEFAULT_ANGLE_OFFSETS: [f64; 6] = [-2.5, -1.0, -0.1, 0.1, 1.0, 2.5];
pub const DEFAULT_DC_FRACS: [f64; 3] = [-0.05, 0.0, 0.05];

/// The documented grid: 6 angle offsets × 3 × 3 dc errors.
pub fn default_ic_grid(p: &TwoConverterParams) -> Vec<TwoConverterState> {
    ic_grid(p, &DEFAULT_ANGLE_OFFSETS, &DEFAULT_DC_FRACS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub initial: TwoConverterState,
    pub final_state: TwoConverterState,
    pub monotone: bool,
    pub converged: bool,
    /// Max-norm distance to the references at the horizon (∞ if the run blew up).
    pub final_error: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Largest `(𝒱ₙ₊₁ − 𝒱ₙ)/(1 + 𝒱ₙ)` along the run.
    pub max_uptick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub params: TwoConverterParams,
    pub config: CertifyConfig,
    pub reference_residual: f64,
    pub points: Vec<PointResult>,
    pub monotone_fraction: f64,
    pub converged_fraction: f64,
    pub max_energy_uptick: f64,
}

impl CertificationReport {
    pub fn all_monotone(&self) -> bool {
        self.points.iter().all(|p| p.monotone)
    }

    /// `key = value` summary, one item per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "points = {}", self.points.len());
        let _ = writeln!(s, "monotone_fraction = {}", self.monotone_fraction);
        let _ = writeln!(s, "converged_fraction = {}", self.converged_fraction);
        let _ = writeln!(s, "max_energy_uptick = {:e}", self.max_energy_uptick);
        let _ = writeln!(s, "reference_residual = {:e}", self.reference_residual);
        let _ = writeln!(s, "gamma_ac_sum = {}", p.gamma_ac_sum());
        let _ = writeln!(s, "kappa_dc = [{}, {}]", p.sides[0].kappa_dc, p.sides[1].kappa_dc);
        let _ = writeln!(s, "r_ohm = {}", p.r);
        let _ = writeln!(s, "h_s = {}", effective_step(p, &self.config));
        let _ = writeln!(s, "horizon_s = {}", self.config.horizon);
        let _ = writeln!(s, "converged_tol = {:e}", self.config.converged_tol);
        let _ = writeln!(s, "uptick_rel = {:e}", self.config.uptick_rel);
        s
    }
}

/// Rough upper bound on the fastest rate of the linearized field (1/s).
fn stiffness(p: &TwoConverterParams) -> f64 {
    let cross = p.sides[0].mu * p.sides[1].mu / p.r;
    let dc = p
        .sides
        .iter()
        .map(|s| (s.kappa_dc + s.g_dc + s.mu * s.mu / p.r + cross) / s.c_dc)
        .fold(0.0, f64::max);
    dc + 0.5 * p.gamma_ac_sum()
}

/// Step actually used: the configured one, reduced when the gains make the
/// field stiff enough to leave the accurate range of RK4.
pub fn effective_step(p: &TwoConverterParams, cfg: &CertifyConfig) -> f64 {
    cfg.h.min(0.25 / stiffness(p))
}

fn simulate_point(
    index: usize,
    x0: TwoConverterState,
    p: &TwoConverterParams,
    cfg: &CertifyConfig,
    layout: &StateLayout,
    fail_fast: bool,
) -> PointResult {
    let mut x = x0.to_array();
    let mut rk = Rk4::new(3);
    let mut rhs = |_t: f64, x: &[f64], dx: &mut [f64]| {
        let d = two_converter_rhs(&TwoConverterState::from_array([x[0], x[1], x[2]]), p);
        dx.copy_from_slice(&d.to_array());
    };
    let h = effective_step(p, cfg);
    let steps = (cfg.horizon / h).ceil() as usize;
    let h = if steps > 0 { cfg.horizon / steps as f64 } else { h };
    let mut v = energy(&x0, p);
    let (mut v_min, mut v_max, mut uptick) = (v, v, f64::NEG_INFINITY);
    let mut blew_up = false;
    for n in 0..steps {
        if rk.step(&mut rhs, n as f64 * h, h, &mut x, layout).is_err() {
            blew_up = true;
            break;
        }
        let v_next = energy(&TwoConverterState::from_array(x), p);
        uptick = uptick.max((v_next - v) / (1.0 + v));
        v = v_next;
        v_min = v_min.min(v);
        v_max = v_max.max(v);
        if fail_fast && uptick >= cfg.uptick_rel {
            break;
        }
    }
    let final_state = TwoConverterState::from_array(x);
    let final_error = if blew_up { f64::INFINITY } else { final_state.distance(&p.reference()) };
    let uptick = if steps == 0 { 0.0 } else { uptick };
    PointResult {
        index,
        initial: x0,
        final_state,
        monotone: !blew_up && uptick < cfg.uptick_rel,
        converged: final_error < cfg.converged_tol,
        final_error,
        v_min,
        v_max,
        max_uptick: if blew_up { f64::INFINITY } else { uptick },
    }
}

/// Simulates the reduced model from every grid point (in parallel) and
/// reports energy monotonicity and convergence.
pub fn certify(p: &TwoConverterParams, grid: &[TwoConverterState], cfg: &CertifyConfig) -> Result<CertificationReport> {
    certify_inner(p, grid, cfg, false)
}

/// True when every grid trajectory has non-increasing energy. Stops at the
/// first violation, so failing gains are cheap to reject.
pub fn all_monotone(p: &TwoConverterParams, grid: &[TwoConverterState], cfg: &CertifyConfig) -> Result<bool> {
    Ok(certify_inner(p, grid, cfg, true)?.all_monotone())
}

fn certify_inner(
    p: &TwoConverterParams,
    grid: &[TwoConverterState],
    cfg: &CertifyConfig,
    fail_fast: bool,
) -> Result<CertificationReport> {
    p.validate()?;
    if grid.is_empty() {
        return Err(Error::Usage("initial-condition grid is empty".into()));
    }
    if !(cfg.h > 0.0 && cfg.horizon >= 0.0) {
        return Err(Error::Parameter("certification needs h > 0 and horizon >= 0".into()));
    }
    let mut layout = StateLayout::new();
    layout.register("two_converter", "state", 3)?;
    let failed = AtomicBool::new(false);
    let points: Vec<PointResult> = grid
        .par_iter()
        .enumerate()
        .filter_map(|(k, x0)| {
            if fail_fast && failed.load(Ordering::Relaxed) {
                return None;
            }
            let r = simulate_point(k, *x0, p, cfg, &layout, fail_fast);
            if !r.monotone {
                failed.store(true, Ordering::Relaxed);
            }
            Some(r)
        })
        .collect();
    let n = points.len() as f64;
    Ok(CertificationReport {
        params: *p,
        config: *cfg,
        reference_residual: p.reference_residual(),
        monotone_fraction: points.iter().filter(|r| r.monotone).count() as f64 / n,
        converged_fraction: points.iter().filter(|r| r.converged).count() as f64 / n,
        max_energy_uptick: points.iter().map(|r| r.max_uptick).fold(f64::NEG_INFINITY, f64::max),
        points,
    })
}

/// Outcome of a one-dimensional gain search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Threshold {
    /// Smallest passing gain found (upper end of the final bracket).
    Found(f64),
    /// Passes already at the lower search bound.
    AtLowerBound(f64),
    /// Fails at the upper search bound.
    NotFound,
}

impl Threshold {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Threshold::Found(v) | Threshold::AtLowerBound(v) => Some(v),
            Threshold::NotFound => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub gamma_ac_min: Threshold,
    pub kappa_dc_min: Threshold,
}

/// Search interval and relative precision of the bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchBounds {
    pub gamma_ac: (f64, f64),
    pub kappa_dc: (f64, f64),
    pub rel_precision: f64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            gamma_ac: (1e-2, 1e4),
            kappa_dc: (1.0, 1e5),
            rel_precision: 0.01,
        }
    }
}

/// Geometric bisection for the smallest gain in `[lo, hi]` with `passes`.
pub fn bisect_gain(lo: f64, hi: f64, rel: f64, mut passes: impl FnMut(f64) -> Result<bool>) -> Result<Threshold> {
    if !(lo > 0.0 && hi > lo && rel > 0.0) {
        return Err(Error::Parameter(format!("bad search interval [{lo}, {hi}] / precision {rel}")));
    }
    if passes(lo)? {
        return Ok(Threshold::AtLowerBound(lo));
    }
    if !passes(hi)? {
        return Ok(Threshold::NotFound);
    }
    let (mut a, mut b) = (lo, hi);
    while b / a - 1.0 > rel {
        let m = (a * b).sqrt();
        if passes(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(Threshold::Found(b))
}

/// Bisection on the ac gain sum (dc gains as in `template`) and on the common
/// dc gain (ac gains as in `template`), each to `bounds.rel_precision`.
pub fn estimate_gain_thresholds(
    template: &TwoConverterParams,
    grid: &[TwoConverterState],
    cfg: &CertifyConfig,
    bounds: &SearchBounds,
) -> Result<ThresholdEstimate> {
    let (lo, hi) = bounds.gamma_ac;
    let gamma_ac_min = bisect_gain(lo, hi, bounds.rel_precision, |g| {
        all_monotone(&template.with_gamma_ac_sum(g), grid, cfg)
    })?;
    let (lo, hi) = bounds.kappa_dc;
    let kappa_dc_min = bisect_gain(lo, hi, bounds.rel_precision, |k| {
        all_monotone(&template.with_kappa_dc(k), grid, cfg)
    })?;
    Ok(ThresholdEstimate {
        gamma_ac_min,
        kappa_dc_min,
    })
}
