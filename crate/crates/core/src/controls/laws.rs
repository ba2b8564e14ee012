//! Control laws as pure functions of their inputs.

use crate::numerics::frames::{clarke, norm, rotate, Vec2};

use super::config::{DcLoopMode, InverseDroop};

/// Radicand floor of the angle-term denominator near antipodal angles.
pub const ANTIPODAL_FLOOR: f64 = 1e-9;

/// `ω_c = ω_0 + d·(p_r − p)`.
#[inline]
pub fn droop_frequency(p_filtered: f64, p_r: f64, d_p_omega: f64, omega_0: f64) -> f64 {
    omega_0 + d_p_omega * (p_r - p_filtered)
}

/// `ω_c = η·v_dc`.
#[inline]
pub fn matching_frequency(v_dc: f64, eta: f64) -> f64 {
    eta * v_dc
}

/// Hybrid angle control with the exact angle term, `ω_0 + γ_dc (v_dc − v_dc,r) + γ_ac·term`.
#[inline]
pub fn hac_frequency(v_dc: f64, v_dc_ref: f64, angle_term: f64, gamma_dc: f64, gamma_ac: f64, omega_0: f64) -> f64 {
    omega_0 + gamma_dc * (v_dc - v_dc_ref) + gamma_ac * angle_term
}

/// Ideal hybrid angle control frequency for relative angle `delta`.
pub fn hac_frequency_ideal(
    v_dc: f64,
    v_dc_ref: f64,
    delta: f64,
    delta_r: f64,
    gamma_dc: f64,
    gamma_ac: f64,
    omega_0: f64,
) -> f64 {
    hac_frequency(v_dc, v_dc_ref, -((delta - delta_r) / 2.0).sin(), gamma_dc, gamma_ac, omega_0)
}

/// `−sin((δ − δ_r)/2)` from a (possibly filtered) pair `(cos δ, −sin δ)`.
///
/// Exact for unit inputs away from `δ − δ_r = π`; there the radicand is
/// floored at [`ANTIPODAL_FLOOR`].
pub fn hac_angle_term(cos_sin_neg: Vec2, delta_r: f64) -> f64 {
    let (c, s) = (cos_sin_neg[0], -cos_sin_neg[1]);
    let (sr, cr) = delta_r.sin_cos();
    let radicand = 2.0 * (1.0 + c * cr + s * sr);
    (sr * c - s * cr) / radicand.max(ANTIPODAL_FLOOR).sqrt()
}

/// Normalized voltage `v_abc / v_r` brought to the controller frame:
/// `(cos δ, −sin δ)` scaled by the voltage magnitude ratio.
///
/// `v_abc` are phase voltages; `v_r_phase` the phase amplitude reference.
pub fn measured_angle_pair(v_abc: [f64; 3], v_r_phase: f64, theta_c: f64) -> Vec2 {
    let n = [v_abc[0] / v_r_phase, v_abc[1] / v_r_phase, v_abc[2] / v_r_phase];
    rotate(clarke(n), theta_c)
}

/// One explicit-Euler step of a first-order low-pass filter.
#[inline]
pub fn lpf_step(y: f64, u: f64, omega_f: f64, dt: f64) -> f64 {
    y + dt * omega_f * (u - y)
}

/// Discrete measured angle term: measure, filter (when `omega_f` is set),
/// combine. Advances `lpf` by `dt`.
pub fn hac_angle_term_measured(
    v_abc: [f64; 3],
    v_r_phase: f64,
    theta_c: f64,
    delta_r: f64,
    lpf: &mut Vec2,
    omega_f: Option<f64>,
    dt: f64,
) -> f64 {
    let u = measured_angle_pair(v_abc, v_r_phase, theta_c);
    match omega_f {
        Some(w) => {
            lpf[0] = lpf_step(lpf[0], u[0], w, dt);
            lpf[1] = lpf_step(lpf[1], u[1], w, dt);
        }
        None => *lpf = u,
    }
    hac_angle_term(*lpf, delta_r)
}

/// dc source current reference (A).
///
/// `p` is the ac power delivered at the filter output and `i_x` the current
/// drawn by the switching stage; `v_dc·i_x − p` is the filter's loss and
/// storage, fed forward with the dc-link loss `G_dc·v_dc`.
#[allow(clippy::too_many_arguments)]
pub fn dc_current_reference(
    v_dc: f64,
    v_dc_ref: f64,
    p: f64,
    i_x: f64,
    p_r: f64,
    g_dc: f64,
    kappa_dc: f64,
    mode: DcLoopMode,
) -> f64 {
    let prop = kappa_dc * (v_dc_ref - v_dc);
    match mode {
        DcLoopMode::Full => prop + p_r / v_dc_ref + g_dc * v_dc + (v_dc * i_x - p) / v_dc_ref,
        DcLoopMode::ProportionalOnly => prop,
    }
}

/// PI output with clamping to `[0, 1]`.
///
/// Returns `(μ, integrate)`: `integrate` is false when the output is pinned
/// and the error would push it further out.
#[inline]
pub fn ac_pi_output(err: f64, integral: f64, kappa_p: f64, kappa_i: f64) -> (f64, bool) {
    let raw = kappa_p * err + kappa_i * integral;
    if raw > 1.0 {
        (1.0, err < 0.0)
    } else if raw < 0.0 {
        (0.0, err > 0.0)
    } else {
        (raw, true)
    }
}

/// Voltage error normalized by the reference, `(v_r − ‖v‖) / v_r`.
#[inline]
pub fn ac_voltage_error(v_ab: Vec2, v_r: f64) -> f64 {
    (v_r - norm(v_ab)) / v_r
}

/// Discrete ac voltage magnitude control; advances `integral` (of the
/// normalized error) by `dt`.
pub fn ac_voltage_magnitude(v_ab: Vec2, v_r: f64, integral: &mut f64, kappa_p: f64, kappa_i: f64, dt: f64) -> f64 {
    let err = ac_voltage_error(v_ab, v_r);
    let (_, go) = ac_pi_output(err, *integral, kappa_p, kappa_i);
    if go {
        *integral += err * dt;
    }
    ac_pi_output(err, *integral, kappa_p, kappa_i).0
}

/// `p_r = p⋆ + d_{ω−p}(ω_c − ω_0)`.
#[inline]
pub fn inverse_droop_power(omega_c: f64, omega_0: f64, aug: &InverseDroop) -> f64 {
    aug.p_star + aug.d_omega_p * (omega_c - omega_0)
}

/// Discrete inverse-droop augmentation: returns `p_r` and advances `delta_r`
/// by `κ_pδ (p_r − p) dt`.
pub fn inverse_droop_reference(omega_c: f64, omega_0: f64, p: f64, aug: &InverseDroop, delta_r: &mut f64, dt: f64) -> f64 {
    let p_r = inverse_droop_power(omega_c, omega_0, aug);
    *delta_r += aug.kappa_p_delta * (p_r - p) * dt;
    p_r
}

/// `m = μ (cos θ_c, sin θ_c)`.
#[inline]
pub fn modulation_vector(mu: f64, theta_c: f64) -> Vec2 {
    let (s, c) = theta_c.sin_cos();
    [mu * c, mu * s]
}
