//! Sinusoidal steady state of the network and the power flow used for
//! initialization.
//!
//! With power-invariant αβ vectors a balanced quantity at angular frequency
//! ω is `x_α + j x_β = X e^{jωt}`, where `|X|` is the line-to-line RMS value
//! and `S = V·conj(I)` is the three-phase complex power.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::model::NetworkModel;

/// Which series impedance a port contributes to the phasor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortSeries {
    /// Transformer only: terminal nodes sit at the device terminals.
    Transformer,
    /// Transformer plus device series impedance: terminal nodes are the
    /// device source voltages.
    Full,
}

/// Nodal admittance matrix over network buses followed by port terminals.
#[derive(Debug, Clone)]
pub struct PhasorNetwork {
    pub n_bus: usize,
    pub n_term: usize,
    pub y: DMatrix<Complex64>,
}

impl PhasorNetwork {
    /// Build in SI units at angular frequency `omega` with bus conductances `g_bus`.
    pub fn build(net: &NetworkModel, omega: f64, g_bus: &[f64], series: PortSeries) -> Self {
        let nb = net.n_buses();
        let nt = net.n_ports();
        let mut y = DMatrix::<Complex64>::zeros(nb + nt, nb + nt);
        for n in 0..nb {
            y[(n, n)] += Complex64::new(g_bus[n], omega * net.bus_c[n]);
        }
        for (l, &(a, b)) in net.lines.iter().zip(net.line_ends()) {
            let ys = Complex64::new(l.r_line, omega * l.l_line).inv();
            y[(a, a)] += ys;
            y[(b, b)] += ys;
            y[(a, b)] -= ys;
            y[(b, a)] -= ys;
        }
        for (j, p) in net.ports.iter().enumerate() {
            let (r, l) = match series {
                PortSeries::Transformer => (p.r_xfmr, p.l_xfmr),
                PortSeries::Full => (p.r(), p.l()),
            };
            let ys = Complex64::new(r, omega * l).inv();
            let t = nb + j;
            y[(p.bus, p.bus)] += ys;
            y[(t, t)] += ys;
            y[(p.bus, t)] -= ys;
            y[(t, p.bus)] -= ys;
        }
        Self { n_bus: nb, n_term: nt, y }
    }

    /// Same network with admittances scaled to per unit of `z_b`.
    pub fn to_pu(&self, z_b: f64) -> Self {
        Self {
            n_bus: self.n_bus,
            n_term: self.n_term,
            y: self.y.map(|v| v * z_b),
        }
    }

    fn blocks(
        &self,
    ) -> (
        DMatrix<Complex64>,
        DMatrix<Complex64>,
        DMatrix<Complex64>,
        DMatrix<Complex64>,
    ) {
        let (nb, nt) = (self.n_bus, self.n_term);
        (
            self.y.view((0, 0), (nb, nb)).into_owned(),
            self.y.view((0, nb), (nb, nt)).into_owned(),
            self.y.view((nb, 0), (nt, nb)).into_owned(),
            self.y.view((nb, nb), (nt, nt)).into_owned(),
        )
    }

    /// Bus voltages when the terminal nodes are held at `v_term`.
    pub fn bus_voltages(&self, v_term: &[Complex64]) -> Result<Vec<Complex64>> {
        let (ynn, ynt, _, _) = self.blocks();
        let vt = DVector::from_column_slice(v_term);
        let rhs = -(ynt * vt);
        let lu = ynn.lu();
        let vn = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Config("singular bus admittance matrix".into()))?;
        Ok(vn.iter().copied().collect())
    }

    /// Kron reduction onto the terminal nodes: `I_term = Y_red · V_term`.
    pub fn kron(&self) -> Result<DMatrix<Complex64>> {
        let (ynn, ynt, ytn, ytt) = self.blocks();
        let x = ynn
            .lu()
            .solve(&ynt)
            .ok_or_else(|| Error::Config("singular bus admittance matrix".into()))?;
        Ok(ytt - ytn * x)
    }
}

/// How a terminal's active power is fixed in the power flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalControl {
    /// Absorbs the mismatch; angle reference.
    Slack,
    /// Fixed active power (pu).
    FixedP(f64),
    /// Takes `weight · λ` where λ is common to all sharing terminals.
    Share(f64),
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Terminal voltages (pu).
    pub v_term: Vec<Complex64>,
    /// Complex power injected by each terminal into the network (pu).
    pub s_term: Vec<Complex64>,
    /// Terminal currents into the network (pu).
    pub i_term: Vec<Complex64>,
    /// Network bus voltages (pu).
    pub v_bus: Vec<Complex64>,
    pub iterations: usize,
}

/// Solve for terminal angles with terminal magnitudes `v_mag` (pu) held fixed.
///
/// Terminal 0 is the angle reference. Either exactly one terminal is
/// `Slack` and the others `FixedP`, or none is `Slack` and at least one is
/// `Share`.
pub fn power_flow(
    net: &NetworkModel,
    g_bus: &[f64],
    v_mag: &[f64],
    control: &[TerminalControl],
) -> Result<PowerFlowSolution> {
    let nt = net.n_ports();
    if v_mag.len() != nt || control.len() != nt || nt == 0 {
        return Err(Error::Config(format!(
            "power flow needs one magnitude and one control per terminal ({nt})"
        )));
    }
    let n_slack = control
        .iter()
        .filter(|c| matches!(c, TerminalControl::Slack))
        .count();
    let n_share = control
        .iter()
        .filter(|c| matches!(c, TerminalControl::Share(_)))
        .count();
    if !(n_slack == 1 && n_share == 0 || n_slack == 0 && n_share >= 1) {
        return Err(Error::Config(
            "power flow needs one slack terminal or at least one sharing terminal".into(),
        ));
    }
    let omega = net.base.omega_b();
    let pn = PhasorNetwork::build(net, omega, g_bus, PortSeries::Transformer).to_pu(net.base.z_b());
    let y = pn.kron()?;

    // unknowns: angles of terminals 1.., plus λ when sharing
    let n_unk = nt - 1 + n_share.min(1);
    let voltages = |u: &[f64]| -> Vec<Complex64> {
        (0..nt)
            .map(|j| {
                let th = if j == 0 { 0.0 } else { u[j - 1] };
                Complex64::from_polar(v_mag[j], th)
            })
            .collect()
    };
    let injections = |v: &[Complex64]| -> Vec<Complex64> {
        let vv = DVector::from_column_slice(v);
        let i = &y * vv;
        v.iter().zip(i.iter()).map(|(v, i)| v * i.conj()).collect()
    };
    let residual = |u: &[f64]| -> Vec<f64> {
        let s = injections(&voltages(u));
        let lambda = if n_share > 0 { u[nt - 1] } else { 0.0 };
        control
            .iter()
            .zip(&s)
            .filter_map(|(c, s)| match *c {
                TerminalControl::Slack => None,
                TerminalControl::FixedP(p) => Some(s.re - p),
                TerminalControl::Share(w) => Some(s.re - w * lambda),
            })
            .collect()
    };

    let mut u = vec![0.0; n_unk];
    if n_share > 0 {
        let total: f64 = g_bus.iter().sum::<f64>() * net.base.z_b();
        let w: f64 = control
            .iter()
            .map(|c| match c {
                TerminalControl::Share(w) => *w,
                _ => 0.0,
            })
            .sum();
        u[n_unk - 1] = total / w.max(1e-9);
    }
    let mut iterations = 0;
    loop {
        let f = residual(&u);
        let norm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < 1e-12 {
            break;
        }
        iterations += 1;
        if iterations > 50 || !norm.is_finite() {
            return Err(Error::Config(format!(
                "power flow did not converge (mismatch {norm:.3e} pu)"
            )));
        }
        let mut jac = DMatrix::<f64>::zeros(n_unk, n_unk);
        for k in 0..n_unk {
            let eps = 1e-7;
            let mut up = u.clone();
            up[k] += eps;
            let mut dn = u.clone();
            dn[k] -= eps;
            let (fp, fm) = (residual(&up), residual(&dn));
            for r in 0..n_unk {
                jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * eps);
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_vec(f))
            .ok_or_else(|| Error::Config("power flow Jacobian is singular".into()))?;
        for k in 0..n_unk {
            u[k] -= step[k];
        }
    }
    let v_term = voltages(&u);
    let i_term: Vec<Complex64> = (&y * DVector::from_column_slice(&v_term))
        .iter()
        .copied()
        .collect();
    let s_term = v_term.iter().zip(&i_term).map(|(v, i)| v * i.conj()).collect();
    let v_bus = pn.bus_voltages(&v_term)?;
    Ok(PowerFlowSolution {
        v_term,
        s_term,
        i_term,
        v_bus,
        iterations,
    })
}
