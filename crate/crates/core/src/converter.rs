//! Averaged dc–ac converter plant: current-limited dc source with first-order
//! lag, dc-link capacitor with conductive losses, lossless switching stage and
//! LC output filter.
//!
//! ```text
//!   i_dc,r ─sat─▶ 1/(τ s+1) ─ i_dc ─┬─ C_dc ─┬─ G_dc ─┬─[m]─ i_x    v_x = m·v_dc ─ R ─ L ─┬─ C ─┬─ i_grid ▶
//! ```

use crate::error::{Error, Result};
use crate::numerics::frames::{dot, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// dc-link conductance (S).
    pub g_dc: f64,
    /// dc-link capacitance (F).
    pub c_dc: f64,
    /// Filter resistance (Ω).
    pub r: f64,
    /// Filter inductance (H).
    pub l: f64,
    /// Filter capacitance (F).
    pub c: f64,
    /// dc source time constant (s).
    pub tau_dc: f64,
    /// dc source current limit (pu of `s_rated / v_dc_ref`).
    pub i_dc_max: f64,
    /// dc voltage reference (V).
    pub v_dc_ref: f64,
    /// Rated ac voltage, line-to-line RMS (V).
    pub v_ac_rated: f64,
    /// Rating (VA).
    pub s_rated: f64,
    /// Number of parallel modules represented.
    pub n_modules: u32,
}

impl ConverterParams {
    /// The 500 kVA module used as the aggregation building block.
    ///
    /// `g_dc` is 0.83 mS: read as siemens the listed value would dissipate ten
    /// times the module rating at `v_dc_ref`, while 0.83 mS is a 1 % loss.
    pub fn reference_module() -> Self {
        Self {
            g_dc: 0.83e-3,
            c_dc: 0.008,
            r: 0.001,
            l: 200e-6,
            c: 300e-6,
            tau_dc: 0.05,
            i_dc_max: 1.2,
            v_dc_ref: 2440.0,
            v_ac_rated: 1000.0,
            s_rated: 500e3,
            n_modules: 1,
        }
    }

    /// 200 reference modules: the 100 MVA unit placed at converter nodes.
    pub fn aggregated_100mva() -> Self {
        aggregate(&Self::reference_module(), 200).expect("n > 0")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g_dc", self.g_dc),
            ("c_dc", self.c_dc),
            ("r", self.r),
            ("l", self.l),
            ("c", self.c),
            ("tau_dc", self.tau_dc),
            ("v_dc_ref", self.v_dc_ref),
            ("v_ac_rated", self.v_ac_rated),
            ("s_rated", self.s_rated),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "converter parameter `{name}` must be positive, got {v}"
                )));
            }
        }
        if !(self.i_dc_max >= 1.0) {
            return Err(Error::Parameter(format!(
                "i_dc_max must be at least 1 pu, got {}",
                self.i_dc_max
            )));
        }
        if self.n_modules == 0 {
            return Err(Error::Parameter("n_modules must be >= 1".into()));
        }
        Ok(())
    }

    /// dc current base (A): rated power at the dc reference voltage.
    pub fn i_dc_base(&self) -> f64 {
        self.s_rated / self.v_dc_ref
    }

    /// Source current limit in A.
    pub fn i_dc_limit(&self) -> f64 {
        self.i_dc_max * self.i_dc_base()
    }

    /// ac impedance base (Ω) at the rated voltage.
    pub fn z_base(&self) -> f64 {
        self.v_ac_rated * self.v_ac_rated / self.s_rated
    }
}

/// Parallel aggregation of `n` identical modules.
pub fn aggregate(module: &ConverterParams, n: i64) -> Result<ConverterParams> {
    if n <= 0 {
        return Err(Error::Parameter(format!(
            "aggregation count must be positive, got {n}"
        )));
    }
    let k = n as f64;
    Ok(ConverterParams {
        g_dc: module.g_dc * k,
        c_dc: module.c_dc * k,
        r: module.r / k,
        l: module.l / k,
        c: module.c * k,
        s_rated: module.s_rated * k,
        n_modules: module.n_modules * n as u32,
        ..*module
    })
}

/// Plant state, SI units, power-invariant αβ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConverterState {
    pub i_dc: f64,
    pub v_dc: f64,
    /// Switch-side inductor current.
    pub i_s: Vec2,
    /// Filter capacitor voltage.
    pub v: Vec2,
}

impl ConverterState {
    pub const LEN: usize = 6;

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            i_dc: x[0],
            v_dc: x[1],
            i_s: [x[2], x[3]],
            v: [x[4], x[5]],
        }
    }

    pub fn write(&self, out: &mut [f64]) {
        out[0] = self.i_dc;
        out[1] = self.v_dc;
        out[2] = self.i_s[0];
        out[3] = self.i_s[1];
        out[4] = self.v[0];
        out[5] = self.v[1];
    }
}

/// dc current drawn by the switching stage, `i_x = mᵀ i_s`.
#[inline]
pub fn stage_dc_current(m: Vec2, i_s: Vec2) -> f64 {
    dot(m, i_s)
}

/// Clamp applied to the source current reference (A).
#[inline]
pub fn saturate_reference(i_dc_ref: f64, p: &ConverterParams) -> f64 {
    let lim = p.i_dc_limit();
    i_dc_ref.clamp(-lim, lim)
}

/// dc-side part of the plant: `(di_dc/dt, dv_dc/dt)`.
#[inline]
pub fn dc_side_rhs(i_dc: f64, v_dc: f64, i_x: f64, i_dc_ref: f64, p: &ConverterParams) -> (f64, f64) {
    let di = (saturate_reference(i_dc_ref, p) - i_dc) / p.tau_dc;
    let dv = (i_dc - p.g_dc * v_dc - i_x) / p.c_dc;
    (di, dv)
}

/// Time derivative of the plant state.
///
/// `m` is the modulation vector (not limited here: over-modulation is
/// observable rather than prevented), `i_grid` the current leaving the filter
/// capacitor node, `i_dc_ref` the commanded source current in A. Non-finite
/// inputs propagate to a non-finite derivative, which the integrator reports.
pub fn converter_rhs(
    x: &ConverterState,
    m: Vec2,
    i_grid: Vec2,
    i_dc_ref: f64,
    p: &ConverterParams,
) -> ConverterState {
    let i_x = stage_dc_current(m, x.i_s);
    let (di_dc, dv_dc) = dc_side_rhs(x.i_dc, x.v_dc, i_x, i_dc_ref, p);
    let v_x = [m[0] * x.v_dc, m[1] * x.v_dc];
    ConverterState {
        i_dc: di_dc,
        v_dc: dv_dc,
        i_s: [
            (v_x[0] - p.r * x.i_s[0] - x.v[0]) / p.l,
            (v_x[1] - p.r * x.i_s[1] - x.v[1]) / p.l,
        ],
        v: [(x.i_s[0] - i_grid[0]) / p.c, (x.i_s[1] - i_grid[1]) / p.c],
    }
}

/// Stage power seen from both sides: `(v_dc·i_x, v_xᵀ i_s)`.
pub fn stage_power(x: &ConverterState, m: Vec2) -> (f64, f64) {
    let dc = x.v_dc * stage_dc_current(m, x.i_s);
    let v_x = [m[0] * x.v_dc, m[1] * x.v_dc];
    (dc, dot(v_x, x.i_s))
}
