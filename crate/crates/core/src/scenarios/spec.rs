//! Scenario description, as read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::controls::DEFAULT_OMEGA_F;
use crate::error::{Error, Result};
use crate::metrics::StabilityThresholds;

pub const SCENARIO_FORMAT: &str = "gridform-scenario";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Sm,
    Gfc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Droop,
    Matching,
    Hac,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Droop => "droop",
            StrategyKind::Matching => "matching",
            StrategyKind::Hac => "hac",
        }
    }
}

/// Filter cutoff in Hz, or disabled (`"none"` in files).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lpf {
    Hz(f64),
    Off,
}

impl Lpf {
    /// Cutoff in rad/s.
    pub fn omega(&self) -> Option<f64> {
        match *self {
            Lpf::Hz(f) => Some(std::f64::consts::TAU * f),
            Lpf::Off => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Lpf::Hz(f) => format!("{f}"),
            Lpf::Off => "none".into(),
        }
    }
}

impl Default for Lpf {
    fn default() -> Self {
        Lpf::Hz(DEFAULT_OMEGA_F / std::f64::consts::TAU)
    }
}

impl Serialize for Lpf {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Lpf::Hz(f) => s.serialize_f64(f),
            Lpf::Off => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Lpf {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(f) => Ok(Lpf::Hz(f)),
            Raw::Int(i) => Ok(Lpf::Hz(i as f64)),
            Raw::Str(s) if s == "none" => Ok(Lpf::Off),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a cutoff in Hz or \"none\", got \"{s}\""
            ))),
        }
    }
}

/// Optional per-unit overrides of converter control gains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainOverrides {
    /// Droop, % frequency per pu power.
    pub droop_percent: Option<f64>,
    pub gamma_ac: Option<f64>,
    /// γ_dc as a fraction of η.
    pub gamma_dc_frac: Option<f64>,
    pub kappa_dc: Option<f64>,
    pub kappa_p: Option<f64>,
    pub kappa_i: Option<f64>,
    /// Filter the stationary-frame voltage instead of its rotated image (HAC).
    pub filter_abc: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterOverrides {
    pub n_modules: Option<i64>,
    pub i_dc_max: Option<f64>,
    pub tau_dc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineOverrides {
    pub h: Option<f64>,
    pub d_p: Option<f64>,
    pub tau_g: Option<f64>,
    pub avr_k_a: Option<f64>,
    pub avr_t_a: Option<f64>,
    pub pss_k: Option<f64>,
    pub pss_t1: Option<f64>,
    pub pss_t2: Option<f64>,
    pub pss_t_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    /// Terminal bus id.
    pub node: u32,
    pub kind: UnitKind,
    /// Required for converters.
    pub strategy: Option<StrategyKind>,
    /// Measurement filter; default 5 Hz for droop and HAC, off for matching.
    pub lpf_hz: Option<Lpf>,
    /// HAC angle from the voltage measurement (default) or the exact angle.
    pub measured: Option<bool>,
    #[serde(default)]
    pub gains: GainOverrides,
    #[serde(default)]
    pub converter: ConverterOverrides,
    #[serde(default)]
    pub machine: MachineOverrides,
}

impl UnitSpec {
    pub fn device_id(&self) -> String {
        match self.kind {
            UnitKind::Sm => format!("sm{}", self.node),
            UnitKind::Gfc => format!("gfc{}", self.node),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub h_s: f64,
    pub record_every: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            h_s: 20e-6,
            record_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusLoad {
    pub bus: u32,
    pub p_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// Multiplier on the dataset loads.
    #[serde(default = "one")]
    pub scale: f64,
    /// Replace the (scaled) dataset load at these buses.
    #[serde(default, rename = "bus")]
    pub buses: Vec<BusLoad>,
}

fn one() -> f64 {
    1.0
}

impl Default for LoadSpec {
    fn default() -> Self {
        Self {
            scale: 1.0,
            buses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub bus: u32,
    /// Load increase at nominal voltage (MW).
    pub delta_p_mw: f64,
    /// Event time after the settling phase (s).
    pub t_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    /// RoCoF window (s); anchored at the first event.
    pub rocof_window_s: f64,
    /// Trailing window for load-sharing averages (s).
    pub sharing_window_s: f64,
    /// Settling band as a fraction of each channel's post-event deviation.
    pub settle_band_frac: f64,
    pub thresholds: StabilityThresholds,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            rocof_window_s: 0.15,
            sharing_window_s: 1.0,
            settle_band_frac: 0.02,
            thresholds: StabilityThresholds::default(),
        }
    }
}

/// Cartesian parameter grid; axes vary in the order listed here, the last
/// one fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Strategy applied to every converter.
    #[serde(default)]
    pub strategy: Vec<StrategyKind>,
    /// Size of the first event (MW).
    #[serde(default)]
    pub delta_p_mw: Vec<f64>,
    /// Filter cutoff applied to every converter.
    #[serde(default)]
    pub lpf_hz: Vec<Lpf>,
    /// PSS of every machine on/off.
    #[serde(default)]
    pub pss: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub format: String,
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Network dataset path, relative to the scenario file; bundled 9-bus if absent.
    #[serde(default)]
    pub network: Option<PathBuf>,
    pub horizon_s: f64,
    #[serde(default = "two")]
    pub settle_s: f64,
    #[serde(default = "yes")]
    pub pss: bool,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub load: LoadSpec,
    #[serde(default, rename = "event")]
    pub events: Vec<EventSpec>,
    #[serde(rename = "unit")]
    pub units: Vec<UnitSpec>,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn two() -> f64 {
    2.0
}

fn yes() -> bool {
    true
}

impl ScenarioSpec {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a scenario file; a relative `network` path is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut spec = Self::parse(&text, &path.display().to_string())?;
        if let (Some(net), Some(dir)) = (&spec.network, path.parent()) {
            if net.is_relative() {
                spec.network = Some(dir.join(net));
            }
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.format != SCENARIO_FORMAT {
            return cfg(format!("format: expected \"{SCENARIO_FORMAT}\", got \"{}\"", self.format));
        }
        if self.version != 1 {
            return cfg(format!("version: unsupported version {}", self.version));
        }
        if !(self.horizon_s > 0.0) {
            return cfg(format!("horizon_s: must be positive, got {}", self.horizon_s));
        }
        if !(self.settle_s >= 0.0) {
            return cfg(format!("settle_s: must be non-negative, got {}", self.settle_s));
        }
        if !(self.integrator.h_s > 0.0) || self.integrator.record_every == 0 {
            return cfg("integrator: need h_s > 0 and record_every >= 1".into());
        }
        if self.units.len() != 3 {
            return cfg(format!(
                "unit: exactly 3 generation units expected, got {}",
                self.units.len()
            ));
        }
        let mut nodes: Vec<u32> = self.units.iter().map(|u| u.node).collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() != self.units.len() {
            return cfg("unit: a node is assigned more than once".into());
        }
        for (k, u) in self.units.iter().enumerate() {
            match (u.kind, u.strategy) {
                (UnitKind::Gfc, None) => {
                    return cfg(format!("unit[{k}] (node {}): converter needs `strategy`", u.node))
                }
                (UnitKind::Sm, Some(_)) => {
                    return cfg(format!(
                        "unit[{k}] (node {}): `strategy` applies to converters only",
                        u.node
                    ))
                }
                _ => {}
            }
            if let Some(Lpf::Hz(f)) = u.lpf_hz {
                if !(f > 0.0) {
                    return cfg(format!("unit[{k}].lpf_hz: must be positive or \"none\""));
                }
            }
        }
        for (k, e) in self.events.iter().enumerate() {
            if !(e.t_s >= 0.0 && e.t_s < self.horizon_s) {
                return cfg(format!(
                    "event[{k}].t_s: {} is outside the horizon [0, {})",
                    e.t_s, self.horizon_s
                ));
            }
        }
        if !(self.load.scale >= 0.0) {
            return cfg("load.scale: must be non-negative".into());
        }
        if let Some(sw) = &self.sweep {
            if !sw.delta_p_mw.is_empty() && self.events.is_empty() {
                return cfg("sweep.delta_p_mw: scenario has no event to vary".into());
            }
        }
        Ok(())
    }

    /// First event time (0 without events).
    pub fn event_time(&self) -> f64 {
        self.events.iter().map(|e| e.t_s).reduce(f64::min).unwrap_or(0.0)
    }
}
