//! Assembly of devices and network into one ODE, and its initialization.

use std::sync::Arc;

use num_complex::Complex64;

use crate::base::SystemBase;
use crate::controls::{
    controller_rhs, steady_control_state, ControlConfig, ControlState, Measurements, Strategy,
};
use crate::converter::{aggregate, converter_rhs, stage_power, ConverterParams, ConverterState};
use crate::error::{Error, Result};
use crate::machine::{
    internal_emf, machine_rhs, steady_state, MachineParams, MachineSetpoints, MachineState,
};
use crate::network::{
    network_rhs, power_flow, LoadEvent, NetworkDataset, NetworkModel, TerminalControl,
};
use crate::numerics::frames::{norm, wrap_angle, Vec2};
use crate::numerics::{StateLayout, StateVector};

use super::spec::{Lpf, ScenarioSpec, StrategyKind, UnitKind, UnitSpec};

const MAX_PORTS: usize = 8;

#[derive(Debug, Clone)]
pub enum DeviceModel {
    Gfc {
        conv: ConverterParams,
        ctrl: ControlConfig,
        /// Network-side over device-side voltage ratio.
        ratio: f64,
        plant: usize,
        control: usize,
    },
    Sm {
        params: MachineParams,
        set: MachineSetpoints,
        /// Voltage and current bases on the network side.
        v_b: f64,
        i_b: f64,
        offset: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Device {
    pub id: String,
    pub node: u32,
    pub port: usize,
    pub model: DeviceModel,
}

impl Device {
    pub fn is_gfc(&self) -> bool {
        matches!(self.model, DeviceModel::Gfc { .. })
    }

    pub fn rating(&self) -> f64 {
        match &self.model {
            DeviceModel::Gfc { conv, .. } => conv.s_rated,
            DeviceModel::Sm { params, .. } => params.s_rated,
        }
    }
}

/// Signals derived from the state of one device.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeviceSignals {
    /// Internal frequency: controller frequency or rotor speed (rad/s).
    pub omega: f64,
    /// Active power delivered (pu of rating).
    pub p: f64,
    /// Terminal / filter voltage magnitude (pu).
    pub v: f64,
    /// dc-link voltage (V); zero for machines.
    pub v_dc: f64,
    /// dc source current (pu); zero for machines.
    pub i_dc: f64,
    /// Modulation magnitude; zero for machines.
    pub mu: f64,
    /// `|v_dc i_x − v_xᵀ i_s| / max(|v_dc i_x|, |v_xᵀ i_s|)` of the switching stage.
    pub stage_residual: f64,
}

pub const SIGNAL_NAMES: [&str; 6] = ["omega", "p", "v", "v_dc", "i_dc", "mu"];

impl DeviceSignals {
    pub fn values(&self) -> [f64; 6] {
        [self.omega, self.p, self.v, self.v_dc, self.i_dc, self.mu]
    }
}

#[derive(Debug, Clone)]
pub struct System {
    pub base: SystemBase,
    pub net: NetworkModel,
    pub devices: Vec<Device>,
    pub layout: Arc<StateLayout>,
    pub net_offset: usize,
    pub omega_0: f64,
}

impl System {
    /// Time derivative; `g_bus` are the load conductances in effect. When
    /// `signals` is given it receives one entry per device.
    pub fn rhs(&self, x: &[f64], g_bus: &[f64], dx: &mut [f64], signals: Option<&mut [DeviceSignals]>) {
        let xn = &x[self.net_offset..];
        let mut emf = [[0.0; 2]; MAX_PORTS];
        for d in &self.devices {
            emf[d.port] = match &d.model {
                DeviceModel::Gfc { ratio, plant, .. } => {
                    let v = [x[plant + 4], x[plant + 5]];
                    [ratio * v[0], ratio * v[1]]
                }
                DeviceModel::Sm { v_b, offset, .. } => {
                    let e = internal_emf(&MachineState::from_slice(&x[*offset..]));
                    [e[0] * v_b, e[1] * v_b]
                }
            };
        }
        let np = self.net.n_ports();
        network_rhs(&self.net, xn, &emf[..np], &[], g_bus, &mut dx[self.net_offset..]);

        let mut signals = signals;
        for (k, d) in self.devices.iter().enumerate() {
            let i_port = self.net.port_current(xn, d.port);
            let sig = match &d.model {
                DeviceModel::Gfc {
                    conv,
                    ctrl,
                    ratio,
                    plant,
                    control,
                } => {
                    let xp = ConverterState::from_slice(&x[*plant..]);
                    let xc = ControlState::from_slice(&x[*control..]);
                    let meas = Measurements {
                        v_dc: xp.v_dc,
                        v: xp.v,
                        i_s: xp.i_s,
                        i_grid: [ratio * i_port[0], ratio * i_port[1]],
                    };
                    let mut dc = ControlState::default();
                    let out = controller_rhs(ctrl, conv, &xc, &meas, &mut dc);
                    let dp = converter_rhs(&xp, out.m, meas.i_grid, out.i_dc_ref, conv);
                    dp.write(&mut dx[*plant..]);
                    dc.write(&mut dx[*control..]);
                    if signals.is_none() {
                        continue;
                    }
                    let (pdc, pac) = stage_power(&xp, out.m);
                    let scale = pdc.abs().max(pac.abs());
                    DeviceSignals {
                        omega: out.omega_c,
                        p: out.p / conv.s_rated,
                        v: norm(xp.v) / conv.v_ac_rated,
                        v_dc: xp.v_dc,
                        i_dc: xp.i_dc / conv.i_dc_base(),
                        mu: out.mu,
                        stage_residual: if scale > 0.0 { (pdc - pac).abs() / scale } else { 0.0 },
                    }
                }
                DeviceModel::Sm {
                    params,
                    set,
                    i_b,
                    offset,
                    ..
                } => {
                    let m = MachineState::from_slice(&x[*offset..]);
                    let i = [i_port[0] / i_b, i_port[1] / i_b];
                    let po = self.net.port_offset(d.port) + self.net_offset;
                    let di = [dx[po] / i_b, dx[po + 1] / i_b];
                    let e = internal_emf(&m);
                    let l = params.x_d_prime / self.base.omega_b();
                    let v_t = [
                        e[0] - params.r_s * i[0] - l * di[0],
                        e[1] - params.r_s * i[1] - l * di[1],
                    ];
                    let dm = machine_rhs(&m, v_t, i, set, params, self.base.omega_b());
                    dm.write(&mut dx[*offset..]);
                    if signals.is_none() {
                        continue;
                    }
                    DeviceSignals {
                        omega: m.omega * self.base.omega_b(),
                        p: crate::numerics::dot(v_t, i),
                        v: norm(v_t),
                        ..Default::default()
                    }
                }
            };
            if let Some(s) = signals.as_deref_mut() {
                s[k] = sig;
            }
        }
    }

    /// Frequencies of all devices (rad/s) at state `x`.
    pub fn signals(&self, x: &[f64], g_bus: &[f64]) -> Vec<DeviceSignals> {
        let mut dx = vec![0.0; x.len()];
        let mut s = vec![DeviceSignals::default(); self.devices.len()];
        self.rhs(x, g_bus, &mut dx, Some(&mut s));
        s
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.id == id)
    }
}

/// Operating point found by the power flow, per device.
#[derive(Debug, Clone, PartialEq)]
pub struct InitPoint {
    pub device: String,
    /// Active power (pu of rating).
    pub p: f64,
    /// Reactive power (pu of rating).
    pub q: f64,
    /// dc source current (pu); converters only.
    pub i_dc: f64,
    /// Angle reference adopted by HAC (rad).
    pub delta_r: Option<f64>,
}

/// Assembled system with its initial state and event schedule.
#[derive(Debug, Clone)]
pub struct Built {
    pub system: System,
    pub x0: StateVector,
    /// Pre-event load conductances (S).
    pub g_base: Vec<f64>,
    pub events: Vec<LoadEvent>,
    pub init: Vec<InitPoint>,
}

fn converter_params(u: &UnitSpec) -> Result<ConverterParams> {
    let module = ConverterParams::reference_module();
    let mut p = aggregate(&module, u.converter.n_modules.unwrap_or(200))?;
    if let Some(v) = u.converter.i_dc_max {
        p.i_dc_max = v;
    }
    if let Some(v) = u.converter.tau_dc {
        p.tau_dc = v;
    }
    p.validate()?;
    Ok(p)
}

fn machine_params(u: &UnitSpec, pss: bool) -> Result<MachineParams> {
    let mut p = MachineParams::default();
    let o = &u.machine;
    let set = |f: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *f = v;
        }
    };
    set(&mut p.h, o.h);
    set(&mut p.d_p, o.d_p);
    set(&mut p.tau_g, o.tau_g);
    set(&mut p.avr.k_a, o.avr_k_a);
    set(&mut p.avr.t_a, o.avr_t_a);
    set(&mut p.pss.k_pss, o.pss_k);
    set(&mut p.pss.t1, o.pss_t1);
    set(&mut p.pss.t2, o.pss_t2);
    set(&mut p.pss.t_w, o.pss_t_w);
    p.pss.enabled = pss;
    p.validate()?;
    Ok(p)
}

/// Control configuration of a converter unit before operating-point references are set.
pub fn control_config(u: &UnitSpec, conv: &ConverterParams, omega_0: f64) -> Result<ControlConfig> {
    let kind = u.strategy.ok_or_else(|| {
        Error::Config(format!("unit at node {}: converter needs a strategy", u.node))
    })?;
    let v_r = conv.v_ac_rated;
    let mut c = match kind {
        StrategyKind::Droop => ControlConfig::droop(omega_0, v_r),
        StrategyKind::Matching => ControlConfig::matching(omega_0, v_r, conv.v_dc_ref),
        StrategyKind::Hac => ControlConfig::hac(omega_0, v_r, conv.v_dc_ref),
    };
    let lpf = match (u.lpf_hz, kind) {
        (Some(l), _) => l,
        (None, StrategyKind::Matching) => Lpf::Off,
        (None, _) => Lpf::default(),
    };
    let g = &u.gains;
    c.strategy = c.strategy.with_omega_f(lpf.omega());
    match &mut c.strategy {
        Strategy::Droop { d_p_omega, .. } => {
            if let Some(d) = g.droop_percent {
                *d_p_omega = d / 100.0 * omega_0;
            }
        }
        Strategy::Matching { .. } => {}
        Strategy::Hac {
            gamma_dc,
            gamma_ac,
            measured,
            filter_abc,
            ..
        } => {
            if let Some(v) = g.gamma_ac {
                *gamma_ac = v;
            }
            if let Some(v) = g.gamma_dc_frac {
                *gamma_dc = v * omega_0 / conv.v_dc_ref;
            }
            if let Some(v) = u.measured {
                *measured = v;
            }
            if let Some(v) = g.filter_abc {
                *filter_abc = v;
            }
        }
    }
    if let Some(v) = g.kappa_dc {
        c.dc_loop.kappa_dc = v;
    }
    if let Some(v) = g.kappa_p {
        c.ac_loop.kappa_p = v;
    }
    if let Some(v) = g.kappa_i {
        c.ac_loop.kappa_i = v;
    }
    c.validate()?;
    Ok(c)
}

fn c2v(z: Complex64) -> Vec2 {
    [z.re, z.im]
}

/// Network with the scenario's load levels applied.
pub fn scenario_network(spec: &ScenarioSpec) -> Result<NetworkModel> {
    let ds = match &spec.network {
        Some(p) => NetworkDataset::load(p)?,
        None => NetworkDataset::ieee9(),
    };
    let mut net = NetworkModel::from_dataset(&ds)?;
    for g in net.g_base.iter_mut() {
        *g *= spec.load.scale;
    }
    let vb2 = net.base.v_b * net.base.v_b;
    for b in &spec.load.buses {
        let n = net
            .bus_index(b.bus)
            .map_err(|_| Error::Config(format!("load.bus: unknown network bus {}", b.bus)))?;
        if !(b.p_mw >= 0.0) {
            return Err(Error::Config(format!("load.bus {}: p_mw must be >= 0", b.bus)));
        }
        net.g_base[n] = b.p_mw * 1e6 / vb2;
    }
    Ok(net)
}

/// Wire devices to the network and compute a steady initial state.
pub fn build_system(spec: &ScenarioSpec) -> Result<Built> {
    spec.validate()?;
    let mut net = scenario_network(spec)?;
    let base = net.base;
    if net.n_ports() > MAX_PORTS {
        return Err(Error::Config(format!("at most {MAX_PORTS} device ports supported")));
    }
    let omega_0 = base.omega_b();

    let mut units: Vec<&UnitSpec> = spec.units.iter().collect();
    units.sort_by_key(|u| u.node);
    let mut ports = Vec::new();
    for u in &units {
        let port = net.port_index(u.node).map_err(|_| {
            Error::Config(format!("unit at node {}: node is not a device terminal", u.node))
        })?;
        ports.push(port);
    }
    if ports.len() != net.n_ports() {
        return Err(Error::Config(format!(
            "unit: {} terminals in the network but {} units assigned",
            net.n_ports(),
            ports.len()
        )));
    }

    // equal per-unit sharing of the base load
    let ratings: Vec<f64> = units
        .iter()
        .map(|u| match u.kind {
            UnitKind::Gfc => converter_params(u).map(|c| c.s_rated),
            UnitKind::Sm => machine_params(u, spec.pss).map(|m| m.s_rated),
        })
        .collect::<Result<_>>()?;
    let mut controls = vec![TerminalControl::FixedP(0.0); net.n_ports()];
    for (k, &port) in ports.iter().enumerate() {
        controls[port] = TerminalControl::Share(ratings[k] / base.s_b);
    }
    let pf = power_flow(&net, &net.g_base, &vec![1.0; net.n_ports()], &controls)?;

    let mut layout = StateLayout::new();
    let mut devices = Vec::new();
    for (k, u) in units.iter().enumerate() {
        let id = u.device_id();
        let model = match u.kind {
            UnitKind::Gfc => {
                let conv = converter_params(u)?;
                let ctrl = control_config(u, &conv, omega_0)?;
                let plant = layout.register(&id, "plant", ConverterState::LEN)?;
                let control = layout.register(&id, "control", ControlState::LEN)?;
                DeviceModel::Gfc {
                    ratio: base.v_b / conv.v_ac_rated,
                    conv,
                    ctrl,
                    plant,
                    control,
                }
            }
            UnitKind::Sm => {
                let params = machine_params(u, spec.pss)?;
                let offset = layout.register(&id, "machine", MachineState::LEN)?;
                let z_b = base.v_b * base.v_b / params.s_rated;
                net.set_port_device_series(ports[k], params.r_s * z_b, params.x_d_prime * z_b / omega_0);
                DeviceModel::Sm {
                    v_b: base.v_b,
                    i_b: params.s_rated / base.v_b,
                    set: MachineSetpoints { p_ref: 0.0, v_ref: 1.0 },
                    params,
                    offset,
                }
            }
        };
        devices.push(Device {
            id,
            node: u.node,
            port: ports[k],
            model,
        });
    }
    let net_offset = layout.register("network", "lines", 2 * net.n_lines())?;
    layout.register("network", "ports", 2 * net.n_ports())?;
    layout.register("network", "buses", 2 * net.n_buses())?;
    let layout = Arc::new(layout);
    let mut x = vec![0.0; layout.len()];

    // network states from the phasor solution (αβ at t = 0 equals the phasor)
    let v_bus: Vec<Complex64> = pf.v_bus.iter().map(|v| v * base.v_b).collect();
    for (k, l) in net.lines.iter().enumerate() {
        let (a, b) = net.line_ends()[k];
        let z = Complex64::new(l.r_line, omega_0 * l.l_line);
        let i = (v_bus[a] - v_bus[b]) / z;
        let o = net_offset + net.line_offset(k);
        x[o] = i.re;
        x[o + 1] = i.im;
    }
    for (n, v) in v_bus.iter().enumerate() {
        let o = net_offset + net.bus_offset(n);
        x[o] = v.re;
        x[o + 1] = v.im;
    }
    let i_b_sys = base.i_b();
    let mut init = Vec::new();
    for d in devices.iter_mut() {
        let j = d.port;
        let i_port = pf.i_term[j] * i_b_sys;
        let o = net_offset + net.port_offset(j);
        x[o] = i_port.re;
        x[o + 1] = i_port.im;
        let s = pf.s_term[j] * base.s_b;
        match &mut d.model {
            DeviceModel::Gfc {
                conv,
                ctrl,
                ratio,
                plant,
                control,
            } => {
                let v = pf.v_term[j] * base.v_b / *ratio;
                let i_g = i_port * *ratio;
                let i_s = i_g + Complex64::new(0.0, omega_0 * conv.c) * v;
                let v_x = v + Complex64::new(conv.r, omega_0 * conv.l) * i_s;
                let v_dc = conv.v_dc_ref;
                let i_x = (v_x * i_s.conj()).re / v_dc;
                let i_dc = conv.g_dc * v_dc + i_x;
                if i_dc > conv.i_dc_limit() {
                    return Err(Error::Config(format!(
                        "{}: operating point needs i_dc = {:.3} pu above the source limit",
                        d.id,
                        i_dc / conv.i_dc_base()
                    )));
                }
                let xp = ConverterState {
                    i_dc,
                    v_dc,
                    i_s: c2v(i_s),
                    v: c2v(v),
                };
                xp.write(&mut x[*plant..]);
                ctrl.v_r = v.norm();
                ctrl.p_r = s.re / conv.s_rated;
                let delta = wrap_angle(v_x.arg() - v.arg());
                let mut delta_r = None;
                if let Strategy::Hac { delta_r: dr, .. } = &mut ctrl.strategy {
                    *dr = delta;
                    delta_r = Some(delta);
                }
                let meas = Measurements {
                    v_dc,
                    v: c2v(v),
                    i_s: c2v(i_s),
                    i_grid: c2v(i_g),
                };
                let xc = steady_control_state(ctrl, conv, &meas, c2v(v_x))?;
                xc.write(&mut x[*control..]);
                init.push(InitPoint {
                    device: d.id.clone(),
                    p: s.re / conv.s_rated,
                    q: s.im / conv.s_rated,
                    i_dc: i_dc / conv.i_dc_base(),
                    delta_r,
                });
            }
            DeviceModel::Sm {
                params,
                set,
                offset,
                ..
            } => {
                let scale = base.s_b / params.s_rated;
                let (xm, sp) = steady_state(c2v(pf.v_term[j]), c2v(pf.i_term[j] * scale), params);
                xm.write(&mut x[*offset..]);
                *set = sp;
                init.push(InitPoint {
                    device: d.id.clone(),
                    p: s.re / params.s_rated,
                    q: s.im / params.s_rated,
                    i_dc: 0.0,
                    delta_r: None,
                });
            }
        }
    }

    let mut events = Vec::new();
    for (k, e) in spec.events.iter().enumerate() {
        let ev = net
            .load_step(e.bus, e.delta_p_mw * 1e6, e.t_s)
            .map_err(|err| Error::Config(format!("event[{k}]: {err}")))?;
        events.push(ev);
    }
    let g_base = net.g_base.clone();
    let system = System {
        base,
        net,
        devices,
        layout: layout.clone(),
        net_offset,
        omega_0,
    };
    Ok(Built {
        system,
        x0: StateVector::from_values(layout, x)?,
        g_base,
        events,
        init,
    })
}
