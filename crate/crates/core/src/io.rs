//! File formats: trajectory, metrics, sweep summary and certification CSVs,
//! run manifests and the two-converter analysis config.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! reading a file back gives the same bits. The column layouts are described
//! in `docs/formats.md`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    CertificationReport, CertifyConfig, SearchBounds, Threshold, ThresholdEstimate, TwoConverterParams,
    DEFAULT_ANGLE_OFFSETS, DEFAULT_DC_FRACS,
};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::scenarios::{Channel, SweepPoint};

pub const TRAJECTORY_HEADER: [&str; 4] = ["t_s", "device_id", "channel", "value"];
pub const CERTIFICATION_HEADER: [&str; 10] = [
    "point", "delta0_rad", "v_dc1_0_v", "v_dc2_0_v", "monotone", "converged", "final_error", "energy_min",
    "energy_max", "max_uptick",
];

/// Full-precision float text; `parse::<f64>` inverts it exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Usage(format!("bad number `{s}` in {what}")))
}

/// Long-format trajectory, one row per (time, channel), time-major.
pub fn write_trajectory<W: Write>(w: W, times: &[f64], channels: &[Channel]) -> Result<()> {
    if let Some(c) = channels.iter().find(|c| c.values.len() != times.len()) {
        return Err(Error::Usage(format!(
            "channel {}.{} has {} samples for {} times",
            c.device,
            c.name,
            c.values.len(),
            times.len()
        )));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (k, &t) in times.iter().enumerate() {
        let ts = fmt_f64(t);
        for c in channels {
            out.write_record([ts.as_str(), &c.device, &c.name, &fmt_f64(c.values[k])])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_trajectory`]: times and channels in order of first
/// appearance.
pub fn read_trajectory<R: Read>(r: R) -> Result<(Vec<f64>, Vec<Channel>)> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::Usage("not a trajectory CSV (header mismatch)".into()));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut channels: Vec<Channel> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t = parse_f64(&rec[0], "t_s")?;
        if times.last().is_none_or(|&l| l.to_bits() != t.to_bits()) {
            times.push(t);
        }
        let v = parse_f64(&rec[3], "value")?;
        match channels.iter_mut().find(|c| c.device == rec[1] && c.name == rec[2]) {
            Some(c) => c.values.push(v),
            None => channels.push(Channel {
                device: rec[1].to_string(),
                name: rec[2].to_string(),
                values: vec![v],
            }),
        }
    }
    if let Some(c) = channels.iter().find(|c| c.values.len() != times.len()) {
        return Err(Error::Usage(format!("channel {}.{} is ragged", c.device, c.name)));
    }
    Ok((times, channels))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Flat metric record of one run: system-wide columns, then per-device nadir
/// and RoCoF.
pub fn metrics_columns(m: &MetricsReport) -> Vec<(String, String)> {
    let mut cols = vec![
        ("stability".to_string(), m.stability.as_str().to_string()),
        ("max_freq_dev_rad_s".into(), fmt_f64(m.max_freq_deviation)),
        ("rocof_rad_s2".into(), fmt_f64(m.rocof)),
        ("rocof_t0_s".into(), fmt_f64(m.rocof_t0)),
        ("rocof_window_s".into(), fmt_f64(m.rocof_delta_t)),
        ("settling_time_s".into(), opt(m.settling_time)),
        ("sharing_error_pu".into(), opt(m.sharing_error)),
    ];
    for d in &m.devices {
        cols.push((format!("{}.nadir_rad_s", d.device), fmt_f64(d.nadir)));
        cols.push((format!("{}.rocof_rad_s2", d.device), fmt_f64(d.rocof)));
    }
    cols
}

pub fn write_metrics<W: Write>(w: W, scenario: &str, m: &MetricsReport) -> Result<()> {
    let cols = metrics_columns(m);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("scenario").chain(cols.iter().map(|c| c.0.as_str())))?;
    out.write_record(std::iter::once(scenario).chain(cols.iter().map(|c| c.1.as_str())))?;
    out.flush()?;
    Ok(())
}

/// One row per grid point: index, axis values, status, error text and the
/// metric columns (blank for failed points).
pub fn write_sweep_summary<W: Write>(w: W, points: &[SweepPoint]) -> Result<()> {
    let mut axes: Vec<String> = Vec::new();
    let mut metric_names: Vec<String> = Vec::new();
    let rows: Vec<Vec<(String, String)>> = points
        .iter()
        .map(|p| p.result.as_ref().map(|r| metrics_columns(&r.metrics)).unwrap_or_default())
        .collect();
    for p in points {
        for (a, _) in &p.labels {
            if !axes.contains(a) {
                axes.push(a.clone());
            }
        }
    }
    for row in &rows {
        for (n, _) in row {
            if !metric_names.contains(n) {
                metric_names.push(n.clone());
            }
        }
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["point".to_string()];
    header.extend(axes.iter().cloned());
    header.extend(["status".to_string(), "error".to_string()]);
    header.extend(metric_names.iter().cloned());
    out.write_record(&header)?;
    for (p, row) in points.iter().zip(&rows) {
        let mut rec = vec![p.index.to_string()];
        for a in &axes {
            rec.push(p.labels.iter().find(|l| &l.0 == a).map(|l| l.1.clone()).unwrap_or_default());
        }
        match &p.result {
            Ok(_) => rec.extend(["ok".to_string(), String::new()]),
            Err(e) => rec.extend(["failed".to_string(), e.clone()]),
        }
        for n in &metric_names {
            rec.push(row.iter().find(|c| &c.0 == n).map(|c| c.1.clone()).unwrap_or_default());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_certification_csv<W: Write>(w: W, report: &CertificationReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CERTIFICATION_HEADER)?;
    for p in &report.points {
        out.write_record([
            p.index.to_string(),
            fmt_f64(p.initial.delta),
            fmt_f64(p.initial.v_dc_1),
            fmt_f64(p.initial.v_dc_2),
            p.monotone.to_string(),
            p.converged.to_string(),
            fmt_f64(p.final_error),
            fmt_f64(p.v_min),
            fmt_f64(p.v_max),
            fmt_f64(p.max_uptick),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn threshold_text(t: &Threshold) -> String {
    match t {
        Threshold::Found(v) => format!("{v}"),
        Threshold::AtLowerBound(v) => format!("<= {v} (passes at the lower search bound)"),
        Threshold::NotFound => "not found (fails at the upper search bound)".into(),
    }
}

/// `key = value` lines for a threshold estimate.
pub fn thresholds_text(t: &ThresholdEstimate) -> String {
    format!(
        "gamma_ac_sum_min = {}\nkappa_dc_min = {}\n",
        threshold_text(&t.gamma_ac_min),
        threshold_text(&t.kappa_dc_min)
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub version: String,
    pub wall_clock_s: f64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Usage(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

pub const ANALYZE2C_FORMAT: &str = "gridform-analyze2c";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcGridSpec {
    /// Offsets from `δ_r` (rad).
    pub angle_offsets: Vec<f64>,
    /// dc voltage errors as fractions of the references.
    pub dc_fracs: Vec<f64>,
}

impl Default for IcGridSpec {
    fn default() -> Self {
        Self {
            angle_offsets: DEFAULT_ANGLE_OFFSETS.to_vec(),
            dc_fracs: DEFAULT_DC_FRACS.to_vec(),
        }
    }
}

/// Config of the `analyze2c` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyze2cSpec {
    pub format: String,
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub params: TwoConverterParams,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub grid: IcGridSpec,
    #[serde(default)]
    pub search: SearchBounds,
}

impl Analyze2cSpec {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        if spec.format != ANALYZE2C_FORMAT || spec.version != 1 {
            return Err(Error::Config(format!(
                "{origin}: expected format = \"{ANALYZE2C_FORMAT}\", version = 1"
            )));
        }
        spec.params.validate()?;
        if spec.grid.angle_offsets.is_empty() || spec.grid.dc_fracs.is_empty() {
            return Err(Error::Config(format!("{origin}: initial-condition grid is empty")));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn float_text_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back: f64 = fmt_f64(v).parse().unwrap();
            if v.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn trajectory_round_trip_is_bit_exact() {
        let times = vec![0.0, 1e-5, 0.1 + 0.2, 3.0];
        let channels = vec![
            Channel {
                device: "gfc2".into(),
                name: "omega".into(),
                values: vec![314.159_265_358_979_3, -0.0, 1e-300, f64::MAX],
            },
            Channel {
                device: "sm1".into(),
                name: "p".into(),
                values: vec![0.75, 1.0 / 3.0, 5e-324, -2.5e17],
            },
        ];
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &times, &channels).unwrap();
        let (t2, c2) = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(t2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), times.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        for (a, b) in channels.iter().zip(&c2) {
            assert_eq!((&a.device, &a.name), (&b.device, &b.name));
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn ragged_channel_rejected() {
        let ch = [Channel {
            device: "a".into(),
            name: "x".into(),
            values: vec![1.0],
        }];
        assert!(write_trajectory(Vec::new(), &[0.0, 1.0], &ch).is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_trajectory("t,device,channel,value\n".as_bytes()).is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
