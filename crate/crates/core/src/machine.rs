//! Synchronous machine: swing equation, two-axis transient model, first-order
//! turbine with droop governor, proportional AVR and a washout/lead-lag PSS.
//!
//! All quantities are per unit on the machine base; the rotor angle is the
//! electrical angle of the d-axis in the stationary αβ frame. The stator is
//! represented as a voltage source behind the transient reactance `x_d'`
//! (the network owns the inductor current). The q-axis transient reactance
//! is taken equal to `x_d'`, so the source depends only on states. An
//! algebraic saliency term `(x_q - x_d')·i_q` coupled to the network
//! inductance is not passive and destabilizes the electromagnetic model.

use crate::error::{Error, Result};
use crate::numerics::frames::{dot, norm, rotate, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvrParams {
    /// Proportional gain (pu field voltage per pu voltage error).
    pub k_a: f64,
    /// Exciter time constant (s).
    pub t_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PssParams {
    pub enabled: bool,
    /// Washout time constant (s).
    pub t_w: f64,
    /// Lead time constant (s).
    pub t1: f64,
    /// Lag time constant (s).
    pub t2: f64,
    /// Gain (pu voltage per pu speed).
    pub k_pss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineParams {
    /// Inertia constant (s).
    pub h: f64,
    /// Damping (pu power per pu speed).
    pub d: f64,
    /// Governor droop (pu speed per pu power).
    pub d_p: f64,
    /// Turbine time constant (s).
    pub tau_g: f64,
    /// Rating (VA).
    pub s_rated: f64,
    /// Rated terminal voltage, line-to-line RMS (V).
    pub v_rated: f64,
    pub x_d: f64,
    pub x_d_prime: f64,
    pub x_q: f64,
    /// d-axis transient open-circuit time constant (s).
    pub t_d0_prime: f64,
    /// q-axis transient open-circuit time constant (s).
    pub t_q0_prime: f64,
    /// Armature resistance (pu).
    pub r_s: f64,
    pub avr: AvrParams,
    pub pss: PssParams,
}

impl Default for MachineParams {
    /// Rated 100 MVA, 13.8 kV, H = 3.7 s, 1 % droop, τ_g = 5 s, D = 0.
    /// Reactances, `T_d0'`, AVR and PSS values are typical textbook numbers.
    fn default() -> Self {
        Self {
            h: 3.7,
            d: 0.0,
            d_p: 0.01,
            tau_g: 5.0,
            s_rated: 100e6,
            v_rated: 13.8e3,
            x_d: 1.8,
            x_d_prime: 0.3,
            x_q: 1.7,
            t_d0_prime: 8.0,
            t_q0_prime: 0.4,
            r_s: 0.003,
            avr: AvrParams { k_a: 50.0, t_a: 0.05 },
            pss: PssParams {
                enabled: true,
                t_w: 10.0,
                t1: 0.2,
                t2: 0.05,
                k_pss: 10.0,
            },
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("h", self.h > 0.0),
            ("tau_g", self.tau_g > 0.0),
            ("d_p", self.d_p > 0.0),
            ("d", self.d >= 0.0),
            ("s_rated", self.s_rated > 0.0),
            ("x_d_prime", self.x_d_prime > 0.0),
            ("x_d >= x_d_prime", self.x_d >= self.x_d_prime),
            ("x_q", self.x_q > 0.0),
            ("t_d0_prime", self.t_d0_prime > 0.0),
            ("t_q0_prime", self.t_q0_prime > 0.0),
            ("r_s", self.r_s >= 0.0),
            ("avr.t_a", self.avr.t_a > 0.0),
            ("avr.k_a", self.avr.k_a > 0.0),
            ("pss.t_w", !self.pss.enabled || self.pss.t_w > 0.0),
            ("pss.t2", !self.pss.enabled || self.pss.t2 > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::Parameter(format!("machine parameter `{name}` invalid")));
            }
        }
        Ok(())
    }
}

/// References held by the machine controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineSetpoints {
    /// Governor load reference (pu).
    pub p_ref: f64,
    /// AVR voltage reference (pu).
    pub v_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MachineState {
    /// Rotor electrical angle (rad), unwrapped.
    pub theta: f64,
    /// Rotor speed (pu).
    pub omega: f64,
    /// Turbine mechanical power (pu).
    pub p_m: f64,
    /// Transient q-axis EMF (pu).
    pub e_q_prime: f64,
    /// Transient d-axis EMF (pu).
    pub e_d_prime: f64,
    /// Field voltage, the AVR state (pu).
    pub e_f: f64,
    /// PSS washout low-pass state.
    pub pss_w: f64,
    /// PSS lead-lag state.
    pub pss_z: f64,
}

impl MachineState {
    pub const LEN: usize = 8;

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            theta: x[0],
            omega: x[1],
            p_m: x[2],
            e_q_prime: x[3],
            e_d_prime: x[4],
            e_f: x[5],
            pss_w: x[6],
            pss_z: x[7],
        }
    }

    pub fn write(&self, out: &mut [f64]) {
        out[..Self::LEN].copy_from_slice(&[
            self.theta,
            self.omega,
            self.p_m,
            self.e_q_prime,
            self.e_d_prime,
            self.e_f,
            self.pss_w,
            self.pss_z,
        ]);
    }
}

/// Stator current in rotor coordinates (d, q).
#[inline]
pub fn current_dq(x: &MachineState, i: Vec2) -> Vec2 {
    rotate(i, x.theta)
}

/// Internal EMF behind `x_d'` in αβ (pu).
#[inline]
pub fn internal_emf(x: &MachineState) -> Vec2 {
    rotate([x.e_d_prime, x.e_q_prime], -x.theta)
}

/// Air-gap power (pu).
#[inline]
pub fn electrical_power(x: &MachineState, i: Vec2) -> f64 {
    dot(internal_emf(x), i)
}

/// PSS output for the current state (zero when disabled).
#[inline]
pub fn pss_output(x: &MachineState, p: &PssParams) -> f64 {
    if !p.enabled {
        return 0.0;
    }
    let y1 = (x.omega - 1.0) - x.pss_w;
    let y2 = x.pss_z + p.t1 / p.t2 * (y1 - x.pss_z);
    p.k_pss * y2
}

/// Time derivative of the machine state.
///
/// `v_t` is the terminal voltage and `i` the stator current (generator
/// convention), both per unit αβ.
pub fn machine_rhs(
    x: &MachineState,
    v_t: Vec2,
    i: Vec2,
    set: &MachineSetpoints,
    p: &MachineParams,
    omega_b: f64,
) -> MachineState {
    let [i_d, i_q] = current_dq(x, i);
    let p_e = electrical_power(x, i);
    let dw = x.omega - 1.0;
    let (dpss_w, dpss_z) = if p.pss.enabled {
        let y1 = dw - x.pss_w;
        (y1 / p.pss.t_w, (y1 - x.pss_z) / p.pss.t2)
    } else {
        (0.0, 0.0)
    };
    let v_pss = pss_output(x, &p.pss);
    MachineState {
        theta: omega_b * x.omega,
        omega: (x.p_m - p_e - p.d * dw) / (2.0 * p.h),
        p_m: (set.p_ref - dw / p.d_p - x.p_m) / p.tau_g,
        e_q_prime: (x.e_f - x.e_q_prime - (p.x_d - p.x_d_prime) * i_d) / p.t_d0_prime,
        e_d_prime: ((p.x_q - p.x_d_prime) * i_q - x.e_d_prime) / p.t_q0_prime,
        e_f: (p.avr.k_a * (set.v_ref - norm(v_t) + v_pss) - x.e_f) / p.avr.t_a,
        pss_w: dpss_w,
        pss_z: dpss_z,
    }
}

/// Steady state reached with terminal phasor `v_t` and current phasor `i`
/// (per unit, at t = 0 so phasors equal αβ vectors).
pub fn steady_state(v_t: Vec2, i: Vec2, p: &MachineParams) -> (MachineState, MachineSetpoints) {
    // q-axis lies along E_Q = V + (r_s + j x_q) I
    let e_q_axis = [
        v_t[0] + p.r_s * i[0] - p.x_q * i[1],
        v_t[1] + p.r_s * i[1] + p.x_q * i[0],
    ];
    let theta = e_q_axis[1].atan2(e_q_axis[0]) - std::f64::consts::FRAC_PI_2;
    let [i_d, i_q] = rotate(i, theta);
    let [_, v_q] = rotate(v_t, theta);
    let e_q_prime = v_q + p.r_s * i_q + p.x_d_prime * i_d;
    let e_f = e_q_prime + (p.x_d - p.x_d_prime) * i_d;
    let mut x = MachineState {
        theta,
        omega: 1.0,
        p_m: 0.0,
        e_q_prime,
        e_d_prime: (p.x_q - p.x_d_prime) * i_q,
        e_f,
        pss_w: 0.0,
        pss_z: 0.0,
    };
    let p_e = electrical_power(&x, i);
    x.p_m = p_e;
    let set = MachineSetpoints {
        p_ref: p_e,
        v_ref: norm(v_t) + e_f / p.avr.k_a,
    };
    (x, set)
}

/// Steady-state share of a load change taken by each unit: proportional to
/// rating over droop.
pub fn governor_sharing_gain(units: &[(f64, f64)]) -> Result<Vec<f64>> {
    if units.is_empty() {
        return Err(Error::Parameter("no units given".into()));
    }
    for &(s, d) in units {
        if !(s > 0.0 && d > 0.0) {
            return Err(Error::Parameter(format!(
                "rating and droop must be positive, got ({s}, {d})"
            )));
        }
    }
    let w: Vec<f64> = units.iter().map(|&(s, d)| s / d).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}
