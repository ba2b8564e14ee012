//! Per-unit bases.
//!
//! Plant quantities are integrated in SI using power-invariant αβ vectors, so
//! a voltage base is a line-to-line RMS value and `S = V·I` holds without a
//! 3/2 factor.

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemBase {
    /// Apparent power base (VA).
    pub s_b: f64,
    /// Voltage base, line-to-line RMS (V).
    pub v_b: f64,
    /// Frequency base (Hz).
    pub f_b: f64,
}

impl SystemBase {
    /// 100 MVA, 230 kV, 50 Hz.
    pub const fn nine_bus() -> Self {
        Self {
            s_b: 100e6,
            v_b: 230e3,
            f_b: 50.0,
        }
    }

    pub fn omega_b(&self) -> f64 {
        TAU * self.f_b
    }

    pub fn z_b(&self) -> f64 {
        self.v_b * self.v_b / self.s_b
    }

    pub fn i_b(&self) -> f64 {
        self.s_b / self.v_b
    }

    /// Inductance (H) of a reactance given in pu.
    pub fn henry(&self, x_pu: f64) -> f64 {
        x_pu * self.z_b() / self.omega_b()
    }

    /// Capacitance (F) of a susceptance given in pu.
    pub fn farad(&self, b_pu: f64) -> f64 {
        b_pu / (self.z_b() * self.omega_b())
    }

    /// Base on the same power and frequency but another voltage level.
    pub fn at_voltage(&self, v_b: f64) -> Self {
        Self { v_b, ..*self }
    }
}

impl Default for SystemBase {
    fn default() -> Self {
        Self::nine_bus()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_bus_impedance_base() {
        let b = SystemBase::nine_bus();
        assert!((b.z_b() - 529.0).abs() < 1e-9);
        assert!((b.omega_b() - 314.159_265_358_979_3).abs() < 1e-12);
        // x = 1 pu at 50 Hz
        assert!((b.henry(1.0) * b.omega_b() - 529.0).abs() < 1e-9);
        assert!((b.farad(1.0) * b.omega_b() * 529.0 - 1.0).abs() < 1e-12);
    }
}
