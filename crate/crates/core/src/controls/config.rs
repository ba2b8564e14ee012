use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid-forming frequency law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Power–frequency droop on filtered active power.
    Droop {
        /// (rad/s) per pu of active power.
        d_p_omega: f64,
        /// Power filter cutoff (rad/s); `None` disables the filter.
        omega_f: Option<f64>,
    },
    /// Frequency proportional to dc-link voltage.
    Matching {
        /// (rad/s) per V.
        eta: f64,
        /// Optional dc-voltage filter cutoff (rad/s).
        omega_f: Option<f64>,
    },
    /// Hybrid angle control: dc-voltage term plus a bounded angle term.
    Hac {
        /// (rad/s) per V.
        gamma_dc: f64,
        /// rad/s
        gamma_ac: f64,
        /// Relative angle reference (rad).
        delta_r: f64,
        /// Angle-signal filter cutoff (rad/s); `None` disables the filter.
        omega_f: Option<f64>,
        /// Use the voltage-measurement implementation instead of the exact angle.
        #[serde(default = "yes")]
        measured: bool,
        /// Filter the normalized stationary-frame voltage instead of its
        /// rotated image.
        #[serde(default)]
        filter_abc: bool,
    },
}

fn yes() -> bool {
    true
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Droop { .. } => "droop",
            Strategy::Matching { .. } => "matching",
            Strategy::Hac { .. } => "hac",
        }
    }

    pub fn omega_f(&self) -> Option<f64> {
        match *self {
            Strategy::Droop { omega_f, .. }
            | Strategy::Matching { omega_f, .. }
            | Strategy::Hac { omega_f, .. } => omega_f,
        }
    }

    pub fn with_omega_f(mut self, w: Option<f64>) -> Self {
        match &mut self {
            Strategy::Droop { omega_f, .. }
            | Strategy::Matching { omega_f, .. }
            | Strategy::Hac { omega_f, .. } => *omega_f = w,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcLoopMode {
    /// Proportional voltage control plus power and loss feedforward.
    #[default]
    Full,
    /// Proportional voltage control only.
    ProportionalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcLoop {
    /// A/V
    pub kappa_dc: f64,
    #[serde(default)]
    pub mode: DcLoopMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcLoop {
    /// Gain on the voltage error normalized by `v_r`.
    pub kappa_p: f64,
    /// 1/s, on the normalized error.
    pub kappa_i: f64,
    /// Hold μ at this value and bypass the PI.
    #[serde(default)]
    pub fixed_mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseDroop {
    /// rad/(s·pu)
    pub kappa_p_delta: f64,
    /// pu per rad/s
    pub d_omega_p: f64,
    /// Power reference at nominal frequency (pu).
    pub p_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub strategy: Strategy,
    /// rad/s
    pub omega_0: f64,
    /// Active power reference (pu of converter rating).
    pub p_r: f64,
    /// ac voltage magnitude reference, line-to-line RMS (V).
    pub v_r: f64,
    pub dc_loop: DcLoop,
    pub ac_loop: AcLoop,
    #[serde(default)]
    pub augmentation: Option<InverseDroop>,
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if let Some(w) = self.strategy.omega_f() {
            if !(w > 0.0) {
                return bad(format!("filter cutoff must be positive, got {w}"));
            }
        }
        match self.strategy {
            Strategy::Hac { gamma_ac, .. } if !(gamma_ac > 0.0) => {
                return bad(format!("gamma_ac must be positive, got {gamma_ac}"))
            }
            Strategy::Droop { d_p_omega, .. } if !(d_p_omega > 0.0) => {
                return bad(format!("droop gain must be positive, got {d_p_omega}"))
            }
            Strategy::Matching { eta, .. } if !(eta > 0.0) => {
                return bad(format!("eta must be positive, got {eta}"))
            }
            _ => {}
        }
        if !(self.dc_loop.kappa_dc > 0.0) {
            return bad(format!("kappa_dc must be positive, got {}", self.dc_loop.kappa_dc));
        }
        if !(self.v_r > 0.0 && self.omega_0 > 0.0) {
            return bad("v_r and omega_0 must be positive".into());
        }
        if !(self.ac_loop.kappa_p >= 0.0 && self.ac_loop.kappa_i >= 0.0) {
            return bad("ac loop gains must be non-negative".into());
        }
        if let Some(mu) = self.ac_loop.fixed_mu {
            if !(mu >= 0.0) {
                return bad(format!("fixed modulation magnitude must be >= 0, got {mu}"));
            }
        }
        if let Some(aug) = self.augmentation {
            if !matches!(self.strategy, Strategy::Hac { .. }) {
                return Err(Error::Config(
                    "inverse-droop augmentation requires the hac strategy".into(),
                ));
            }
            if !(aug.kappa_p_delta >= 0.0 && aug.d_omega_p >= 0.0) {
                return bad("augmentation gains must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Droop with a 1 % frequency drop per pu of power.
    pub fn droop(omega_0: f64, v_r: f64) -> Self {
        Self::with_strategy(
            Strategy::Droop {
                d_p_omega: 0.01 * omega_0,
                omega_f: Some(DEFAULT_OMEGA_F),
            },
            omega_0,
            v_r,
        )
    }

    /// Matching control with `η = ω_0 / v_dc,r`.
    pub fn matching(omega_0: f64, v_r: f64, v_dc_ref: f64) -> Self {
        Self::with_strategy(
            Strategy::Matching {
                eta: omega_0 / v_dc_ref,
                omega_f: None,
            },
            omega_0,
            v_r,
        )
    }

    /// Hybrid angle control with `γ_dc = 0.01 η`, `γ_ac = 205`, `δ_r = 0.0238`.
    pub fn hac(omega_0: f64, v_r: f64, v_dc_ref: f64) -> Self {
        Self::with_strategy(
            Strategy::Hac {
                gamma_dc: 0.01 * omega_0 / v_dc_ref,
                gamma_ac: 205.0,
                delta_r: 0.0238,
                omega_f: Some(DEFAULT_OMEGA_F),
                measured: true,
                filter_abc: false,
            },
            omega_0,
            v_r,
        )
    }

    fn with_strategy(strategy: Strategy, omega_0: f64, v_r: f64) -> Self {
        Self {
            strategy,
            omega_0,
            p_r: 0.0,
            v_r,
            dc_loop: DcLoop {
                kappa_dc: 1.6e3,
                mode: DcLoopMode::Full,
            },
            ac_loop: AcLoop {
                kappa_p: 0.001,
                kappa_i: 0.5,
                fixed_mu: None,
            },
            augmentation: None,
        }
    }
}

/// 5 Hz.
pub const DEFAULT_OMEGA_F: f64 = std::f64::consts::TAU * 5.0;
