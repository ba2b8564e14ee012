//! Network dataset file (TOML): buses, π-section lines, transformers, loads.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base::SystemBase;
use crate::error::{Error, Result};

/// Bundled IEEE 9-bus dataset.
pub const IEEE9_TOML: &str = include_str!("../../../../data/ieee9.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    /// Device terminal; connected to the grid through a transformer.
    Terminal,
    /// Grid node carrying lumped line capacitance.
    Network,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: u32,
    pub kind: BusKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: u32,
    pub to: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    pub b_pu: f64,
    pub r_ohm: f64,
    pub l_henry: f64,
    pub c_half_farad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformerRecord {
    pub terminal: u32,
    pub bus: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    pub r_ohm: f64,
    pub l_henry: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadRecord {
    pub bus: u32,
    pub p_mw: f64,
    pub g_siemens: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDataset {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub s_base_mva: f64,
    pub v_base_kv: f64,
    pub f_base_hz: f64,
    #[serde(rename = "bus")]
    pub buses: Vec<BusRecord>,
    #[serde(rename = "line", default)]
    pub lines: Vec<LineRecord>,
    #[serde(rename = "transformer", default)]
    pub transformers: Vec<TransformerRecord>,
    #[serde(rename = "load", default)]
    pub loads: Vec<LoadRecord>,
}

/// SHA-256 of the dataset bytes, hex encoded.
pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl NetworkDataset {
    pub fn ieee9() -> Self {
        Self::parse(IEEE9_TOML, "<bundled ieee9>").expect("bundled dataset is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let ds: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn base(&self) -> SystemBase {
        SystemBase {
            s_b: self.s_base_mva * 1e6,
            v_b: self.v_base_kv * 1e3,
            f_b: self.f_base_hz,
        }
    }

    pub fn kind_of(&self, id: u32) -> Option<BusKind> {
        self.buses.iter().find(|b| b.id == id).map(|b| b.kind)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != "gridform-network" {
            return Err(Error::Config(format!("unknown dataset format `{}`", self.format)));
        }
        let mut kinds = HashMap::new();
        for b in &self.buses {
            if kinds.insert(b.id, b.kind).is_some() {
                return Err(Error::Config(format!("bus {} defined twice", b.id)));
            }
        }
        let network = |id: u32, what: &str| match kinds.get(&id) {
            Some(BusKind::Network) => Ok(()),
            Some(BusKind::Terminal) => Err(Error::Config(format!(
                "{what} references terminal bus {id}; only network buses allowed"
            ))),
            None => Err(Error::Config(format!("{what} references unknown bus {id}"))),
        };
        let base = self.base();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * b.abs().max(1e-30);
        for (k, l) in self.lines.iter().enumerate() {
            let what = format!("line[{k}] {}-{}", l.from, l.to);
            network(l.from, &what)?;
            network(l.to, &what)?;
            if l.from == l.to {
                return Err(Error::Config(format!("{what} is a self loop")));
            }
            if !(l.r_pu >= 0.0 && l.x_pu > 0.0 && l.b_pu >= 0.0) {
                return Err(Error::Config(format!("{what}: need r >= 0, x > 0, b >= 0")));
            }
            if !close(l.r_ohm, l.r_pu * base.z_b())
                || !close(l.l_henry, base.henry(l.x_pu))
                || !(l.b_pu == 0.0 && l.c_half_farad == 0.0
                    || close(l.c_half_farad, base.farad(l.b_pu / 2.0)))
            {
                return Err(Error::Config(format!("{what}: SI fields disagree with pu fields")));
            }
        }
        let mut seen_terminals = HashMap::new();
        for (k, t) in self.transformers.iter().enumerate() {
            let what = format!("transformer[{k}] {}-{}", t.terminal, t.bus);
            match kinds.get(&t.terminal) {
                Some(BusKind::Terminal) => {}
                _ => {
                    return Err(Error::Config(format!(
                        "{what}: terminal side must be a terminal bus"
                    )))
                }
            }
            network(t.bus, &what)?;
            if !(t.x_pu > 0.0 && t.r_pu >= 0.0) {
                return Err(Error::Config(format!("{what}: need x > 0, r >= 0")));
            }
            if !close(t.l_henry, base.henry(t.x_pu)) || !close(t.r_ohm, t.r_pu * base.z_b()) {
                return Err(Error::Config(format!("{what}: SI fields disagree with pu fields")));
            }
            if seen_terminals.insert(t.terminal, k).is_some() {
                return Err(Error::Config(format!(
                    "terminal bus {} has more than one transformer",
                    t.terminal
                )));
            }
        }
        for b in &self.buses {
            if b.kind == BusKind::Terminal && !seen_terminals.contains_key(&b.id) {
                return Err(Error::Config(format!("terminal bus {} has no transformer", b.id)));
            }
        }
        for (k, l) in self.loads.iter().enumerate() {
            let what = format!("load[{k}] at bus {}", l.bus);
            network(l.bus, &what)?;
            if !(l.p_mw >= 0.0) || !close(l.g_siemens, l.p_mw * 1e6 / (base.v_b * base.v_b)) {
                return Err(Error::Config(format!("{what}: conductance disagrees with p_mw")));
            }
        }
        // every network bus needs capacitance to carry a voltage state
        for b in self.buses.iter().filter(|b| b.kind == BusKind::Network) {
            let c: f64 = self
                .lines
                .iter()
                .filter(|l| l.from == b.id || l.to == b.id)
                .map(|l| l.c_half_farad)
                .sum();
            if !(c > 0.0) {
                return Err(Error::Config(format!(
                    "network bus {} has no shunt capacitance",
                    b.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pinned digest of `data/ieee9.toml`; update deliberately when the data changes.
    const IEEE9_SHA256: &str = "42ea5439ca054eddd209d453e33efd74f9b07bc3ecce184a12f3af7582164350";

    #[test]
    fn bundled_dataset_checksum_is_pinned() {
        assert_eq!(checksum(IEEE9_TOML.as_bytes()), IEEE9_SHA256);
    }

    #[test]
    fn bundled_dataset_parses() {
        let ds = NetworkDataset::ieee9();
        assert_eq!(ds.buses.len(), 9);
        assert_eq!(ds.lines.len(), 6);
        assert_eq!(ds.transformers.len(), 3);
        let total: f64 = ds.loads.iter().map(|l| l.p_mw).sum();
        assert!((total - 315.0).abs() < 1e-12);
    }

    #[test]
    fn dangling_line_is_rejected() {
        let text = IEEE9_TOML.replacen("from = 4\nto = 5", "from = 4\nto = 42", 1);
        let err = NetworkDataset::parse(&text, "t").unwrap_err();
        assert!(err.to_string().contains("unknown bus 42"), "{err}");
    }

    #[test]
    fn inconsistent_si_field_is_rejected() {
        let text = IEEE9_TOML.replacen("r_ohm = 5.29\n", "r_ohm = 6.0\n", 1);
        assert!(NetworkDataset::parse(&text, "t").is_err());
    }

    #[test]
    fn load_on_terminal_bus_is_rejected() {
        let text = IEEE9_TOML.replacen("bus = 5\np_mw", "bus = 1\np_mw", 1);
        assert!(NetworkDataset::parse(&text, "t").is_err());
    }
}
