//! Continuous-time controller of one grid-forming converter.

use crate::converter::{stage_dc_current, ConverterParams};
use crate::error::{Error, Result};
use crate::numerics::frames::{abc_from_plant, dot, norm, phase_amplitude, rotate, wrap_angle, Vec2};

use super::config::{ControlConfig, Strategy};
use super::laws::*;

/// Controller state; `theta_c` is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlState {
    pub theta_c: f64,
    /// Filtered signals: power (pu) for droop, dc voltage (V) for matching,
    /// the angle pair (or stationary normalized voltage) for HAC.
    pub lpf: Vec2,
    /// Integral of the normalized ac voltage error (s).
    pub xi: f64,
    /// Relative angle reference driven by the inverse-droop augmentation.
    pub delta_r: f64,
}

impl ControlState {
    pub const LEN: usize = 5;
    pub const NAMES: [&'static str; 5] = ["theta_c", "lpf_0", "lpf_1", "xi", "delta_r"];

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            theta_c: x[0],
            lpf: [x[1], x[2]],
            xi: x[3],
            delta_r: x[4],
        }
    }

    pub fn write(&self, out: &mut [f64]) {
        out[0] = self.theta_c;
        out[1] = self.lpf[0];
        out[2] = self.lpf[1];
        out[3] = self.xi;
        out[4] = self.delta_r;
    }
}

/// Signals the controller reads from its converter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurements {
    pub v_dc: f64,
    /// Filter capacitor voltage.
    pub v: Vec2,
    /// Switch-side inductor current.
    pub i_s: Vec2,
    /// Current leaving the filter towards the grid.
    pub i_grid: Vec2,
}

impl Measurements {
    /// Active power delivered at the filter output (W).
    pub fn power(&self) -> f64 {
        dot(self.v, self.i_grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutputs {
    pub omega_c: f64,
    pub mu: f64,
    pub m: Vec2,
    pub i_dc_ref: f64,
    /// Active power (W).
    pub p: f64,
    /// Active power reference in effect (pu).
    pub p_r: f64,
}

fn hac_delta_r(cfg: &ControlConfig, x: &ControlState, delta_r: f64) -> f64 {
    if cfg.augmentation.is_some() {
        x.delta_r
    } else {
        delta_r
    }
}

/// Controller derivative and outputs.
pub fn controller_rhs(
    cfg: &ControlConfig,
    conv: &ConverterParams,
    x: &ControlState,
    meas: &Measurements,
    dx: &mut ControlState,
) -> ControlOutputs {
    let p = meas.power();
    let p_pu = p / conv.s_rated;
    *dx = ControlState::default();

    let omega_c = match cfg.strategy {
        Strategy::Droop { d_p_omega, omega_f } => {
            let pf = match omega_f {
                Some(w) => {
                    dx.lpf[0] = w * (p_pu - x.lpf[0]);
                    x.lpf[0]
                }
                None => p_pu,
            };
            droop_frequency(pf, cfg.p_r, d_p_omega, cfg.omega_0)
        }
        Strategy::Matching { eta, omega_f } => {
            let vf = match omega_f {
                Some(w) => {
                    dx.lpf[0] = w * (meas.v_dc - x.lpf[0]);
                    x.lpf[0]
                }
                None => meas.v_dc,
            };
            matching_frequency(vf, eta)
        }
        Strategy::Hac {
            gamma_dc,
            gamma_ac,
            delta_r,
            omega_f,
            measured,
            filter_abc,
        } => {
            let dr = hac_delta_r(cfg, x, delta_r);
            let term = if measured {
                let v_abc = abc_from_plant(meas.v);
                let vr_ph = phase_amplitude(cfg.v_r);
                let pair = match (omega_f, filter_abc) {
                    (Some(w), true) => {
                        let u = crate::numerics::clarke([
                            v_abc[0] / vr_ph,
                            v_abc[1] / vr_ph,
                            v_abc[2] / vr_ph,
                        ]);
                        dx.lpf = [w * (u[0] - x.lpf[0]), w * (u[1] - x.lpf[1])];
                        rotate(x.lpf, x.theta_c)
                    }
                    (Some(w), false) => {
                        let u = measured_angle_pair(v_abc, vr_ph, x.theta_c);
                        dx.lpf = [w * (u[0] - x.lpf[0]), w * (u[1] - x.lpf[1])];
                        x.lpf
                    }
                    (None, _) => measured_angle_pair(v_abc, vr_ph, x.theta_c),
                };
                hac_angle_term(pair, dr)
            } else {
                let delta = wrap_angle(x.theta_c - meas.v[1].atan2(meas.v[0]));
                -(wrap_angle(delta - dr) / 2.0).sin()
            };
            hac_frequency(meas.v_dc, conv.v_dc_ref, term, gamma_dc, gamma_ac, cfg.omega_0)
        }
    };
    dx.theta_c = omega_c;

    let p_r = match &cfg.augmentation {
        Some(aug) => {
            let p_r = inverse_droop_power(omega_c, cfg.omega_0, aug);
            dx.delta_r = aug.kappa_p_delta * (p_r - p_pu);
            p_r
        }
        None => cfg.p_r,
    };

    let mu = match cfg.ac_loop.fixed_mu {
        Some(mu) => mu,
        None => {
            let err = ac_voltage_error(meas.v, cfg.v_r);
            let (mu, go) = ac_pi_output(err, x.xi, cfg.ac_loop.kappa_p, cfg.ac_loop.kappa_i);
            if go {
                dx.xi = err;
            }
            mu
        }
    };
    let m = modulation_vector(mu, x.theta_c);
    let i_x = stage_dc_current(m, meas.i_s);
    let i_dc_ref = dc_current_reference(
        meas.v_dc,
        conv.v_dc_ref,
        p,
        i_x,
        p_r * conv.s_rated,
        conv.g_dc,
        cfg.dc_loop.kappa_dc,
        cfg.dc_loop.mode,
    );
    ControlOutputs {
        omega_c,
        mu,
        m,
        i_dc_ref,
        p,
        p_r,
    }
}

/// Controller state consistent with a steady operating point.
///
/// `meas` is the steady plant, `v_x` the switching-node voltage that
/// sustains it. The filter states take their steady inputs and the PI
/// integral reproduces `μ = ‖v_x‖ / v_dc`.
pub fn steady_control_state(
    cfg: &ControlConfig,
    conv: &ConverterParams,
    meas: &Measurements,
    v_x: Vec2,
) -> Result<ControlState> {
    let theta_c = v_x[1].atan2(v_x[0]);
    let mu = norm(v_x) / meas.v_dc;
    let mut x = ControlState {
        theta_c,
        ..Default::default()
    };
    if cfg.ac_loop.fixed_mu.is_none() {
        if !(cfg.ac_loop.kappa_i > 0.0) {
            return Err(Error::Parameter(
                "steady initialization needs kappa_i > 0 or a fixed modulation magnitude".into(),
            ));
        }
        let err = ac_voltage_error(meas.v, cfg.v_r);
        x.xi = (mu - cfg.ac_loop.kappa_p * err) / cfg.ac_loop.kappa_i;
    }
    match cfg.strategy {
        Strategy::Droop { .. } => x.lpf[0] = meas.power() / conv.s_rated,
        Strategy::Matching { .. } => x.lpf[0] = meas.v_dc,
        Strategy::Hac { filter_abc, .. } => {
            let v_abc = abc_from_plant(meas.v);
            let vr_ph = phase_amplitude(cfg.v_r);
            x.lpf = if filter_abc {
                crate::numerics::clarke([v_abc[0] / vr_ph, v_abc[1] / vr_ph, v_abc[2] / vr_ph])
            } else {
                measured_angle_pair(v_abc, vr_ph, theta_c)
            };
        }
    }
    if let Strategy::Hac { delta_r, .. } = cfg.strategy {
        x.delta_r = delta_r;
    }
    Ok(x)
}
