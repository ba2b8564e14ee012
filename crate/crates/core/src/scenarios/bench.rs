//! Small dynamic test benches outside the 9-bus system.
//!
//! [`TwoConverterBench`] is the full two-converter circuit behind the reduced
//! model in [`crate::analysis`]: both dc sources keep their first-order lag and
//! the connecting line keeps its inductance. [`InfiniteBusBench`] runs one
//! complete converter (plant and controller) against a stiff grid.

use std::sync::Arc;

use crate::analysis::{TwoConverterParams, TwoConverterState};
use crate::controls::{
    controller_rhs, dc_current_reference, hac_frequency_ideal, modulation_vector, steady_control_state, ControlConfig,
    ControlState, DcLoopMode, Measurements,
};
use crate::converter::{converter_rhs, dc_side_rhs, ConverterParams, ConverterState};
use crate::error::{Error, Result};
use crate::numerics::frames::{dot, wrap_angle};
use crate::numerics::{integrate_observed, IntegratorConfig, StateLayout, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoConverterBench {
    pub reduced: TwoConverterParams,
    /// Line inductance (H).
    pub l_line: f64,
    /// dc source lag (s).
    pub tau_dc: f64,
    pub h: f64,
    pub horizon: f64,
}

impl TwoConverterBench {
    pub fn new(reduced: TwoConverterParams) -> Self {
        Self {
            reduced,
            l_line: 2e-6,
            tau_dc: 0.05,
            h: 1e-5,
            horizon: 3.0,
        }
    }

    fn plant(&self, j: usize) -> ConverterParams {
        let s = &self.reduced.sides[j];
        ConverterParams {
            g_dc: s.g_dc,
            c_dc: s.c_dc,
            v_dc_ref: s.v_dc_ref,
            tau_dc: self.tau_dc,
            ..ConverterParams::aggregated_100mva()
        }
    }

    /// `[θ1, θ2, i_dc1, v_dc1, i_dc2, v_dc2, i_α, i_β]`.
    pub fn rhs(&self, x: &[f64], dx: &mut [f64]) {
        let p = &self.reduced;
        let [a, b] = &p.sides;
        let (pa, pb) = (self.plant(0), self.plant(1));
        let delta = x[0] - x[1];
        let m1 = modulation_vector(a.mu, x[0]);
        let m2 = modulation_vector(b.mu, x[1]);
        let i_l = [x[6], x[7]];

        dx[0] = hac_frequency_ideal(x[3], a.v_dc_ref, delta, p.delta_r, a.gamma_dc, a.gamma_ac, p.omega_0);
        dx[1] = hac_frequency_ideal(x[5], b.v_dc_ref, -delta, -p.delta_r, b.gamma_dc, b.gamma_ac, p.omega_0);

        let r1 = dc_current_reference(x[3], a.v_dc_ref, 0.0, 0.0, 0.0, a.g_dc, a.kappa_dc, DcLoopMode::ProportionalOnly);
        let r2 = dc_current_reference(x[5], b.v_dc_ref, 0.0, 0.0, 0.0, b.g_dc, b.kappa_dc, DcLoopMode::ProportionalOnly);
        (dx[2], dx[3]) = dc_side_rhs(x[2], x[3], dot(m1, i_l), r1, &pa);
        (dx[4], dx[5]) = dc_side_rhs(x[4], x[5], -dot(m2, i_l), r2, &pb);

        for k in 0..2 {
            dx[6 + k] = (x[3] * m1[k] - x[5] * m2[k] - p.r * i_l[k]) / self.l_line;
        }
    }

    /// Runs from the references with relaxed sources and returns the final
    /// `(v_dc1, v_dc2, δ)` in the reduced model's coordinates.
    pub fn run(&self) -> Result<TwoConverterState> {
        self.reduced.validate()?;
        if !(self.l_line > 0.0 && self.tau_dc > 0.0) {
            return Err(Error::Parameter("bench line inductance and dc lag must be positive".into()));
        }
        let mut layout = StateLayout::new();
        layout.register("bench", "theta", 2)?;
        layout.register("bench", "dc1", 2)?;
        layout.register("bench", "dc2", 2)?;
        layout.register("bench", "i_line", 2)?;
        let [a, b] = &self.reduced.sides;
        let x0 = StateVector::from_values(
            Arc::new(layout),
            vec![self.reduced.delta_r, 0.0, 0.0, a.v_dc_ref, 0.0, b.v_dc_ref, 0.0, 0.0],
        )?;
        let cfg = IntegratorConfig::new(self.h, self.horizon, usize::MAX)?;
        let end = integrate_observed(|_, x, dx| self.rhs(x, dx), &x0, &cfg, |_, _| {})?;
        let x = &end.values;
        Ok(TwoConverterState {
            v_dc_1: x[3],
            v_dc_2: x[5],
            delta: wrap_angle(x[0] - x[1]),
        })
    }
}

/// One converter behind an RL link to an ideal source `‖v_g‖∠ω_g t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfiniteBusBench {
    pub conv: ConverterParams,
    pub ctrl: ControlConfig,
    /// Link resistance (Ω) and inductance (H).
    pub r_link: f64,
    pub l_link: f64,
    /// Grid voltage, line-to-line RMS (V).
    pub v_grid: f64,
    /// rad/s
    pub omega_grid: f64,
    pub h: f64,
    pub horizon: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InfiniteBusRun {
    pub t: Vec<f64>,
    /// Power at the filter output (pu).
    pub p: Vec<f64>,
    pub omega_c: Vec<f64>,
    pub delta_r: Vec<f64>,
    pub v_dc: Vec<f64>,
}

impl InfiniteBusBench {
    /// 100 MVA converter behind a 0.1 pu reactance, grid at nominal voltage
    /// and frequency.
    pub fn new(ctrl: ControlConfig) -> Self {
        let conv = ConverterParams::aggregated_100mva();
        let z_b = conv.z_base();
        Self {
            conv,
            ctrl,
            r_link: 0.005 * z_b,
            l_link: 0.1 * z_b / ctrl.omega_0,
            v_grid: conv.v_ac_rated,
            omega_grid: ctrl.omega_0,
            h: 2e-5,
            horizon: 3.0,
            record_every: 50,
        }
    }

    fn grid_voltage(&self, t: f64) -> [f64; 2] {
        let (s, c) = (self.omega_grid * t).sin_cos();
        [self.v_grid * c, self.v_grid * s]
    }

    /// `[plant (6), control (5), i_link (2)]`.
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> f64 {
        let plant = ConverterState::from_slice(&x[..6]);
        let ctrl = ControlState::from_slice(&x[6..11]);
        let i_link = [x[11], x[12]];
        let meas = Measurements {
            v_dc: plant.v_dc,
            v: plant.v,
            i_s: plant.i_s,
            i_grid: i_link,
        };
        let mut dctrl = ControlState::default();
        let out = controller_rhs(&self.ctrl, &self.conv, &ctrl, &meas, &mut dctrl);
        converter_rhs(&plant, out.m, i_link, out.i_dc_ref, &self.conv).write(&mut dx[..6]);
        dctrl.write(&mut dx[6..11]);
        let vg = self.grid_voltage(t);
        for k in 0..2 {
            dx[11 + k] = (plant.v[k] - vg[k] - self.r_link * i_link[k]) / self.l_link;
        }
        out.omega_c
    }

    pub fn run(&self) -> Result<InfiniteBusRun> {
        self.conv.validate()?;
        self.ctrl.validate()?;
        if !(self.r_link >= 0.0 && self.l_link > 0.0 && self.v_grid > 0.0) {
            return Err(Error::Parameter("infinite-bus link needs r >= 0, l > 0 and a positive grid voltage".into()));
        }
        let v0 = self.grid_voltage(0.0);
        let plant = ConverterState {
            i_dc: self.conv.g_dc * self.conv.v_dc_ref,
            v_dc: self.conv.v_dc_ref,
            i_s: [0.0, 0.0],
            v: v0,
        };
        let meas = Measurements {
            v_dc: plant.v_dc,
            v: v0,
            ..Default::default()
        };
        let ctrl = steady_control_state(&self.ctrl, &self.conv, &meas, v0)?;

        let mut layout = StateLayout::new();
        layout.register("gfc", "plant", ConverterState::LEN)?;
        layout.register("gfc", "control", ControlState::LEN)?;
        layout.register("link", "i", 2)?;
        let mut values = vec![0.0; 13];
        plant.write(&mut values[..6]);
        ctrl.write(&mut values[6..11]);
        let x0 = StateVector::from_values(Arc::new(layout), values)?;
        let cfg = IntegratorConfig::new(self.h, self.horizon, self.record_every)?;

        let mut run = InfiniteBusRun::default();
        let mut scratch = vec![0.0; 13];
        integrate_observed(
            |t, x, dx| {
                self.rhs(t, x, dx);
            },
            &x0,
            &cfg,
            |t, x| {
                let omega_c = self.rhs(t, x, &mut scratch);
                let plant = ConverterState::from_slice(&x[..6]);
                run.t.push(t);
                run.p.push(dot(plant.v, [x[11], x[12]]) / self.conv.s_rated);
                run.omega_c.push(omega_c);
                run.delta_r.push(x[10]);
                run.v_dc.push(plant.v_dc);
            },
        )?;
        Ok(run)
    }
}
