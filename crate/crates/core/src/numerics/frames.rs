//! Reference-frame transforms.
//!
//! Two αβ scalings appear in this crate:
//!
//! * the amplitude-invariant Clarke transform ([`clarke`]), where a balanced
//!   triple of phase amplitude `A` maps to a vector of norm `A`; the hybrid
//!   angle controller's measurement path uses it;
//! * the power-invariant scaling used for all plant states, where the vector
//!   norm equals the line-to-line RMS value and `p = vᵀi` is three-phase
//!   power. [`abc_from_plant`] converts from it back to phase quantities.


/// Two-component vector in αβ or dq coordinates.
pub type Vec2 = [f64; 2];

const SQRT_3: f64 = 1.732_050_807_568_877_2;
/// sqrt(2/3): power-invariant αβ norm → phase amplitude.
pub const SQRT_2_3: f64 = 0.816_496_580_927_726;

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Amplitude-invariant Clarke transform.
#[inline]
pub fn clarke(abc: [f64; 3]) -> Vec2 {
    let [a, b, c] = abc;
    [(2.0 * a - b - c) / 3.0, (b - c) / SQRT_3]
}

/// Inverse of [`clarke`] on the zero-sequence-free subspace.
#[inline]
pub fn inverse_clarke(ab: Vec2) -> [f64; 3] {
    let [al, be] = ab;
    [
        al,
        -0.5 * al + 0.5 * SQRT_3 * be,
        -0.5 * al - 0.5 * SQRT_3 * be,
    ]
}

/// Planar rotation by `-theta`: stationary αβ into a frame whose d-axis sits
/// at angle `theta`.
#[inline]
pub fn rotate(v: Vec2, theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
}

/// Phase quantities from a power-invariant plant vector.
#[inline]
pub fn abc_from_plant(v: Vec2) -> [f64; 3] {
    inverse_clarke([v[0] * SQRT_2_3, v[1] * SQRT_2_3])
}

/// Phase amplitude corresponding to a line-to-line RMS magnitude.
#[inline]
pub fn phase_amplitude(v_ll_rms: f64) -> f64 {
    v_ll_rms * SQRT_2_3
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn balanced(amp: f64, th: f64) -> [f64; 3] {
        [
            amp * th.cos(),
            amp * (th - TAU / 3.0).cos(),
            amp * (th + TAU / 3.0).cos(),
        ]
    }

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(clarke([0.0; 3]), [0.0, 0.0]);
    }

    #[test]
    fn balanced_triple_maps_to_rotating_vector() {
        for k in 0..64 {
            let th = k as f64 * TAU / 64.0;
            let v = clarke(balanced(2.5, th));
            assert!((v[0] - 2.5 * th.cos()).abs() < 1e-12);
            assert!((v[1] - 2.5 * th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_amplitude_sweep_has_unit_norm() {
        for k in 0..360 {
            let th = k as f64 * TAU / 360.0;
            assert!((norm(clarke(balanced(1.0, th))) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_identity_and_quarter_turn() {
        let v = [0.3, -1.7];
        assert_eq!(rotate(v, 0.0), v);
        let q = rotate([1.0, 0.0], FRAC_PI_2);
        assert!(q[0].abs() < 1e-15 && (q[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn plant_vector_norm_is_line_rms() {
        // 1 kV line-to-line RMS: phase amplitude 816.5 V
        let v = [1000.0 * 0.3f64.cos(), 1000.0 * 0.3f64.sin()];
        let abc = abc_from_plant(v);
        let amp = norm(clarke(abc));
        assert!((amp - phase_amplitude(1000.0)).abs() < 1e-9);
        assert!((abc.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn wrap_is_in_half_open_interval() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn clarke_roundtrip_on_zero_sequence_free_inputs(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let abc = [a, b, -a - b];
            let back = inverse_clarke(clarke(abc));
            for i in 0..3 {
                prop_assert!((back[i] - abc[i]).abs() <= 1e-12 * (1.0 + abc[i].abs()));
            }
        }

        #[test]
        fn rotation_preserves_norm(x in -1e3f64..1e3, y in -1e3f64..1e3, th in -10.0f64..10.0) {
            let r = rotate([x, y], th);
            prop_assert!((norm(r) - norm([x, y])).abs() <= 1e-12 * (1.0 + norm([x, y])));
        }

        #[test]
        fn rotation_inverse_is_identity(x in -1e3f64..1e3, y in -1e3f64..1e3, th in -10.0f64..10.0) {
            let back = rotate(rotate([x, y], th), -th);
            prop_assert!((back[0] - x).abs() <= 1e-12 * (1.0 + x.abs() + y.abs()));
            prop_assert!((back[1] - y).abs() <= 1e-12 * (1.0 + x.abs() + y.abs()));
        }
    }
}
