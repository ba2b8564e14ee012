//! Dynamic αβ network: RL lines with lumped π capacitances at buses, and
//! device ports (transformer plus any device series impedance) feeding buses.

use crate::base::SystemBase;
use crate::error::{Error, Result};
use crate::numerics::Vec2;

use super::dataset::{BusKind, NetworkDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct LineParams {
    pub from_bus: u32,
    pub to_bus: u32,
    /// Ω
    pub r_line: f64,
    /// H
    pub l_line: f64,
    /// F per end
    pub c_half: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerParams {
    /// Device-side terminal bus id.
    pub terminal: u32,
    /// Network bus the transformer feeds.
    pub bus: u32,
    /// Series resistance referred to the network side (Ω).
    pub r: f64,
    /// Series inductance referred to the network side (H).
    pub l: f64,
}

impl TransformerParams {
    /// Voltage ratio network side / device side.
    pub fn ratio(&self, device_v_rated: f64, network_v_b: f64) -> f64 {
        network_v_b / device_v_rated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadParams {
    pub bus: u32,
    /// Conductance realizing the rated power at nominal voltage (S).
    pub g_load: f64,
}

/// Series RL branch from a device source into a network bus: the
/// transformer plus whatever series impedance the device contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub terminal: u32,
    pub bus: usize,
    pub r_xfmr: f64,
    pub l_xfmr: f64,
    pub r_device: f64,
    pub l_device: f64,
    r: f64,
    l: f64,
}

impl Port {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

/// Load step scheduled at `t_event`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadEvent {
    pub bus: usize,
    pub bus_id: u32,
    /// Conductance increment (S).
    pub delta_g: f64,
    pub t_event: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub base: SystemBase,
    /// Ids of the capacitive network buses, in state order.
    pub bus_ids: Vec<u32>,
    /// Lumped shunt capacitance per bus (F).
    pub bus_c: Vec<f64>,
    pub lines: Vec<LineParams>,
    line_ends: Vec<(usize, usize)>,
    pub ports: Vec<Port>,
    /// Pre-event load conductance per bus (S).
    pub g_base: Vec<f64>,
}

impl NetworkModel {
    pub fn from_dataset(ds: &NetworkDataset) -> Result<Self> {
        ds.validate()?;
        let bus_ids: Vec<u32> = ds
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Network)
            .map(|b| b.id)
            .collect();
        let lines = ds
            .lines
            .iter()
            .map(|l| LineParams {
                from_bus: l.from,
                to_bus: l.to,
                r_line: l.r_ohm,
                l_line: l.l_henry,
                c_half: l.c_half_farad,
            })
            .collect();
        let transformers: Vec<TransformerParams> = ds
            .transformers
            .iter()
            .map(|t| TransformerParams {
                terminal: t.terminal,
                bus: t.bus,
                r: t.r_ohm,
                l: t.l_henry,
            })
            .collect();
        let loads: Vec<LoadParams> = ds
            .loads
            .iter()
            .map(|l| LoadParams {
                bus: l.bus,
                g_load: l.g_siemens,
            })
            .collect();
        Self::new(ds.base(), bus_ids, lines, &transformers, &loads)
    }

    pub fn new(
        base: SystemBase,
        bus_ids: Vec<u32>,
        lines: Vec<LineParams>,
        transformers: &[TransformerParams],
        loads: &[LoadParams],
    ) -> Result<Self> {
        let index = |id: u32, what: &str| {
            bus_ids
                .iter()
                .position(|&b| b == id)
                .ok_or_else(|| Error::Config(format!("{what} references unknown bus {id}")))
        };
        let mut bus_c = vec![0.0; bus_ids.len()];
        let mut line_ends = Vec::with_capacity(lines.len());
        for (k, l) in lines.iter().enumerate() {
            let what = format!("line[{k}]");
            if !(l.r_line >= 0.0 && l.l_line > 0.0 && l.c_half >= 0.0) {
                return Err(Error::Parameter(format!(
                    "{what}: need R >= 0, L > 0, C_half >= 0"
                )));
            }
            let a = index(l.from_bus, &what)?;
            let b = index(l.to_bus, &what)?;
            bus_c[a] += l.c_half;
            bus_c[b] += l.c_half;
            line_ends.push((a, b));
        }
        let mut ports = Vec::with_capacity(transformers.len());
        for t in transformers {
            if !(t.l > 0.0 && t.r >= 0.0) {
                return Err(Error::Parameter(format!(
                    "transformer at terminal {}: need L > 0, R >= 0",
                    t.terminal
                )));
            }
            ports.push(Port {
                terminal: t.terminal,
                bus: index(t.bus, "transformer")?,
                r_xfmr: t.r,
                l_xfmr: t.l,
                r_device: 0.0,
                l_device: 0.0,
                r: t.r,
                l: t.l,
            });
        }
        let mut g_base = vec![0.0; bus_ids.len()];
        for l in loads {
            if !(l.g_load >= 0.0) {
                return Err(Error::Parameter(format!("load at bus {}: G < 0", l.bus)));
            }
            g_base[index(l.bus, "load")?] += l.g_load;
        }
        for (i, c) in bus_c.iter().enumerate() {
            if !(*c > 0.0) {
                return Err(Error::Config(format!(
                    "bus {} has no shunt capacitance",
                    bus_ids[i]
                )));
            }
        }
        Ok(Self {
            base,
            bus_ids,
            bus_c,
            lines,
            line_ends,
            ports,
            g_base,
        })
    }

    pub fn bus_index(&self, id: u32) -> Result<usize> {
        self.bus_ids
            .iter()
            .position(|&b| b == id)
            .ok_or_else(|| Error::Config(format!("unknown bus {id}")))
    }

    pub fn port_index(&self, terminal: u32) -> Result<usize> {
        self.ports
            .iter()
            .position(|p| p.terminal == terminal)
            .ok_or_else(|| Error::Config(format!("no port at terminal bus {terminal}")))
    }

    /// Add a device's own series impedance (referred to the network side) to a port.
    pub fn set_port_device_series(&mut self, port: usize, r: f64, l: f64) {
        let p = &mut self.ports[port];
        p.r_device = r;
        p.l_device = l;
        p.r = p.r_xfmr + r;
        p.l = p.l_xfmr + l;
    }

    pub fn line_ends(&self) -> &[(usize, usize)] {
        &self.line_ends
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    /// State length: line currents, port currents, bus voltages (2 each).
    pub fn state_len(&self) -> usize {
        2 * (self.n_lines() + self.n_ports() + self.n_buses())
    }

    pub fn line_offset(&self, k: usize) -> usize {
        2 * k
    }

    pub fn port_offset(&self, j: usize) -> usize {
        2 * (self.n_lines() + j)
    }

    pub fn bus_offset(&self, n: usize) -> usize {
        2 * (self.n_lines() + self.n_ports() + n)
    }

    pub fn line_current(&self, x: &[f64], k: usize) -> Vec2 {
        let o = self.line_offset(k);
        [x[o], x[o + 1]]
    }

    pub fn port_current(&self, x: &[f64], j: usize) -> Vec2 {
        let o = self.port_offset(j);
        [x[o], x[o + 1]]
    }

    pub fn bus_voltage(&self, x: &[f64], n: usize) -> Vec2 {
        let o = self.bus_offset(n);
        [x[o], x[o + 1]]
    }

    pub fn load_step(&self, bus_id: u32, delta_p: f64, t_event: f64) -> Result<LoadEvent> {
        apply_load_step(self, bus_id, delta_p, t_event)
    }

    /// Bus conductances at time `t` with all events whose time has come.
    pub fn conductances_at(&self, t: f64, events: &[LoadEvent], out: &mut [f64]) {
        out.copy_from_slice(&self.g_base);
        for e in events {
            if t >= e.t_event {
                out[e.bus] += e.delta_g;
            }
        }
    }

    /// Net current leaving each bus through its shunt capacitance, i.e. the
    /// current balance `C dv/dt` evaluated from the branch currents.
    pub fn bus_balance(
        &self,
        x: &[f64],
        injections: &[Vec2],
        g_bus: &[f64],
        out: &mut [Vec2],
    ) {
        for (n, o) in out.iter_mut().enumerate() {
            let v = self.bus_voltage(x, n);
            let inj = injections.get(n).copied().unwrap_or([0.0; 2]);
            *o = [inj[0] - g_bus[n] * v[0], inj[1] - g_bus[n] * v[1]];
        }
        for (k, &(a, b)) in self.line_ends.iter().enumerate() {
            let i = self.line_current(x, k);
            out[a][0] -= i[0];
            out[a][1] -= i[1];
            out[b][0] += i[0];
            out[b][1] += i[1];
        }
        for (j, p) in self.ports.iter().enumerate() {
            let i = self.port_current(x, j);
            out[p.bus][0] += i[0];
            out[p.bus][1] += i[1];
        }
    }
}

/// Schedule a load increase of `delta_p` watts (at nominal voltage) on `bus`.
pub fn apply_load_step(
    net: &NetworkModel,
    bus_id: u32,
    delta_p: f64,
    t_event: f64,
) -> Result<LoadEvent> {
    let bus = net.bus_index(bus_id)?;
    if !t_event.is_finite() || t_event < 0.0 {
        return Err(Error::Usage(format!("event time {t_event} is not a valid time")));
    }
    let v = net.base.v_b;
    Ok(LoadEvent {
        bus,
        bus_id,
        delta_g: delta_p / (v * v),
        t_event,
    })
}

/// Network derivative.
///
/// `port_emf[j]` drives port `j` from the device side (already referred to
/// the network voltage level); `injections[n]` are additional bus current
/// injections; `g_bus` the present load conductances.
pub fn network_rhs(
    net: &NetworkModel,
    x: &[f64],
    port_emf: &[Vec2],
    injections: &[Vec2],
    g_bus: &[f64],
    dx: &mut [f64],
) {
    for (k, (l, &(a, b))) in net.lines.iter().zip(&net.line_ends).enumerate() {
        let i = net.line_current(x, k);
        let va = net.bus_voltage(x, a);
        let vb = net.bus_voltage(x, b);
        let o = net.line_offset(k);
        for c in 0..2 {
            dx[o + c] = (va[c] - vb[c] - l.r_line * i[c]) / l.l_line;
        }
    }
    for (j, p) in net.ports.iter().enumerate() {
        let i = net.port_current(x, j);
        let v = net.bus_voltage(x, p.bus);
        let e = port_emf[j];
        let o = net.port_offset(j);
        for c in 0..2 {
            dx[o + c] = (e[c] - v[c] - p.r * i[c]) / p.l;
        }
    }
    for n in 0..net.n_buses() {
        let v = net.bus_voltage(x, n);
        let inj = injections.get(n).copied().unwrap_or([0.0; 2]);
        let o = net.bus_offset(n);
        dx[o] = inj[0] - g_bus[n] * v[0];
        dx[o + 1] = inj[1] - g_bus[n] * v[1];
    }
    for (k, &(a, b)) in net.line_ends.iter().enumerate() {
        let i = net.line_current(x, k);
        let (oa, ob) = (net.bus_offset(a), net.bus_offset(b));
        dx[oa] -= i[0];
        dx[oa + 1] -= i[1];
        dx[ob] += i[0];
        dx[ob + 1] += i[1];
    }
    for (j, p) in net.ports.iter().enumerate() {
        let i = net.port_current(x, j);
        let o = net.bus_offset(p.bus);
        dx[o] += i[0];
        dx[o + 1] += i[1];
    }
    for n in 0..net.n_buses() {
        let o = net.bus_offset(n);
        dx[o] /= net.bus_c[n];
        dx[o + 1] /= net.bus_c[n];
    }
}

/// Power bookkeeping of a network state (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBalance {
    /// Power delivered by port sources and injections.
    pub generated: f64,
    pub load: f64,
    pub losses: f64,
    /// d/dt of stored magnetic and electric energy.
    pub stored_rate: f64,
}

impl PowerBalance {
    pub fn residual(&self) -> f64 {
        self.generated - self.load - self.losses - self.stored_rate
    }
}

pub fn power_balance(
    net: &NetworkModel,
    x: &[f64],
    dx: &[f64],
    port_emf: &[Vec2],
    injections: &[Vec2],
    g_bus: &[f64],
) -> PowerBalance {
    use crate::numerics::dot;
    let mut pb = PowerBalance {
        generated: 0.0,
        load: 0.0,
        losses: 0.0,
        stored_rate: 0.0,
    };
    for (k, l) in net.lines.iter().enumerate() {
        let i = net.line_current(x, k);
        let o = net.line_offset(k);
        pb.losses += l.r_line * dot(i, i);
        pb.stored_rate += l.l_line * dot(i, [dx[o], dx[o + 1]]);
    }
    for (j, p) in net.ports.iter().enumerate() {
        let i = net.port_current(x, j);
        let o = net.port_offset(j);
        pb.generated += dot(port_emf[j], i);
        pb.losses += p.r * dot(i, i);
        pb.stored_rate += p.l * dot(i, [dx[o], dx[o + 1]]);
    }
    for n in 0..net.n_buses() {
        let v = net.bus_voltage(x, n);
        let o = net.bus_offset(n);
        if let Some(inj) = injections.get(n) {
            pb.generated += dot(*inj, v);
        }
        pb.load += g_bus[n] * dot(v, v);
        pb.stored_rate += net.bus_c[n] * dot(v, [dx[o], dx[o + 1]]);
    }
    pb
}
