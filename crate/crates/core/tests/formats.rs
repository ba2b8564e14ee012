//! Frozen output schemas. Set `GRIDFORM_BLESS=1` to rewrite the golden files
//! after an intentional format change (and update docs/formats.md).

mod common;

use std::fs;
use std::path::PathBuf;

use gridform::analysis::{CertificationReport, CertifyConfig, PointResult, TwoConverterParams, TwoConverterState};
use gridform::io::{
    read_trajectory, thresholds_text, write_certification_csv, write_metrics, write_sweep_summary,
    write_trajectory, Manifest,
};
use gridform::analysis::{Threshold, ThresholdEstimate};
use gridform::metrics::{DeviceMetrics, MetricsReport, StabilityFlag};
use gridform::scenarios::{Channel, Diagnostics, SimResult, SweepPoint};

fn golden(name: &str, actual: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("GRIDFORM_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        String::from_utf8_lossy(actual),
        String::from_utf8_lossy(&expected),
        "{name} differs from the golden file"
    );
}

fn channels() -> Vec<Channel> {
    vec![
        Channel {
            device: "gfc1".into(),
            name: "omega".into(),
            values: vec![314.1592653589793, 314.0, 0.1 + 0.2],
        },
        Channel {
            device: "sm2".into(),
            name: "p".into(),
            values: vec![0.5, -1e-300, 5e-324],
        },
    ]
}

fn metrics() -> MetricsReport {
    MetricsReport {
        max_freq_deviation: 1.25,
        rocof: 3.5,
        rocof_t0: 1.0,
        rocof_delta_t: 0.15,
        settling_time: Some(0.27),
        sharing_error: None,
        stability: StabilityFlag::Settled,
        devices: vec![
            DeviceMetrics {
                device: "sm1".into(),
                nadir: 1.25,
                rocof: 3.5,
            },
            DeviceMetrics {
                device: "gfc2".into(),
                nadir: 1.0,
                rocof: 2.0,
            },
        ],
    }
}

#[test]
fn trajectory_schema() {
    let mut out = Vec::new();
    write_trajectory(&mut out, &[0.0, 0.001, 0.002], &channels()).unwrap();
    golden("trajectory.csv", &out);
    let (t, ch) = read_trajectory(&out[..]).unwrap();
    assert_eq!(t, [0.0, 0.001, 0.002]);
    assert_eq!(ch, channels());
}

#[test]
fn metrics_schema() {
    let mut out = Vec::new();
    write_metrics(&mut out, "demo", &metrics()).unwrap();
    golden("metrics.csv", &out);
}

#[test]
fn sweep_summary_schema() {
    let spec = common::scenario("iv-a_all-gfc_hac.toml");
    let ok = SimResult {
        spec: spec.clone(),
        times: vec![],
        channels: vec![],
        metrics: metrics(),
        diagnostics: Diagnostics::default(),
    };
    let points = vec![
        SweepPoint {
            index: 0,
            labels: vec![("strategy".into(), "droop".into()), ("lpf_hz".into(), "none".into())],
            spec: spec.clone(),
            result: Err("settling failed: residual 1e-3, needs 1e-6".into()),
        },
        SweepPoint {
            index: 1,
            labels: vec![("strategy".into(), "hac".into()), ("lpf_hz".into(), "0.2".into())],
            spec,
            result: Ok(ok),
        },
    ];
    let mut out = Vec::new();
    write_sweep_summary(&mut out, &points).unwrap();
    golden("summary.csv", &out);
}

#[test]
fn certification_schema() {
    let p = TwoConverterParams::table_scaled();
    let point = |index, delta, monotone| PointResult {
        index,
        initial: TwoConverterState {
            v_dc_1: 2440.0,
            v_dc_2: 2318.0,
            delta,
        },
        final_state: p.reference(),
        monotone,
        converged: true,
        final_error: 2.5e-9,
        v_min: 0.0,
        v_max: 1234.5,
        max_uptick: if monotone { -0.0 } else { 0.031 },
    };
    let report = CertificationReport {
        params: p,
        config: CertifyConfig::default(),
        reference_residual: 0.0,
        points: vec![point(0, -2.5, true), point(1, 1.0, false)],
        monotone_fraction: 0.5,
        converged_fraction: 1.0,
        max_energy_uptick: 0.031,
    };
    let mut out = Vec::new();
    write_certification_csv(&mut out, &report).unwrap();
    golden("certification.csv", &out);

    let th = ThresholdEstimate {
        gamma_ac_min: Threshold::Found(6.8538958386500815),
        kappa_dc_min: Threshold::NotFound,
    };
    golden("thresholds.txt", thresholds_text(&th).as_bytes());
}

#[test]
fn manifest_schema() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest {
        command: "simulate".into(),
        config_path: "scenarios/demo.toml".into(),
        config_sha256: "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855".into(),
        version: "0.1.0".into(),
        wall_clock_s: 1.5,
        outputs: vec!["trajectory.csv".into(), "manifest.json".into()],
    };
    let path = m.write(dir.path()).unwrap();
    golden("manifest.json", &fs::read(path).unwrap());
}
