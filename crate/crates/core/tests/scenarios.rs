mod common;

use std::fs;

use gridform::io::write_trajectory;
use gridform::metrics::StabilityFlag;
use gridform::scenarios::{build_system, expand_sweep, run, ScenarioSpec, StrategyKind};
use gridform::Error;

use common::{repo_root, scenario};

fn short(mut s: ScenarioSpec, horizon: f64) -> ScenarioSpec {
    s.horizon_s = horizon;
    s.settle_s = 0.5;
    for e in &mut s.events {
        e.t_s = 0.1;
    }
    s.sweep = None;
    s
}

fn device_ids(s: &ScenarioSpec) -> Vec<String> {
    build_system(s).unwrap().system.devices.iter().map(|d| d.id.clone()).collect()
}

#[test]
fn layouts_follow_the_unit_table() {
    assert_eq!(device_ids(&scenario("iv-a_all-gfc_hac.toml")), ["gfc1", "gfc2", "gfc3"]);
    assert_eq!(device_ids(&scenario("iv-b_1sm-2gfc_sweep.toml")), ["sm1", "gfc2", "gfc3"]);
    assert_eq!(device_ids(&scenario("iv-c_2sm-1gfc_droop.toml")), ["sm1", "gfc2", "sm3"]);

    let built = build_system(&scenario("iv-a_all-gfc_hac.toml")).unwrap();
    let blocks: Vec<&str> = built.x0.layout.entries().iter().map(|b| b.device.as_str()).collect();
    assert!(!blocks.iter().any(|d| d.starts_with("sm")), "{blocks:?}");
}

#[test]
fn run_without_events_stays_nominal() {
    let mut s = short(scenario("iv-a_all-gfc_hac.toml"), 0.5);
    s.events.clear();
    let r = run(&s).unwrap();
    assert_eq!(r.metrics.stability, StabilityFlag::Settled);
    assert!(r.metrics.max_freq_deviation < 1e-4, "{}", r.metrics.max_freq_deviation);
    assert!(r.metrics.rocof < 1e-3, "{}", r.metrics.rocof);
    assert!(r.diagnostics.max_stage_residual < 1e-12);
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let mut s = scenario("iv-a_all-gfc_hac.toml");
    s.sweep = Some(Default::default());
    assert!(matches!(expand_sweep(&s), Err(Error::Usage(_))));
    s.sweep = None;
    assert!(matches!(expand_sweep(&s), Err(Error::Usage(_))));
}

#[test]
fn sweep_grid_sizes_and_order() {
    let b = expand_sweep(&scenario("iv-b_1sm-2gfc_sweep.toml")).unwrap();
    assert_eq!(b.len(), 15);
    // last axis fastest
    assert_eq!(b[0].0, [("strategy".into(), "droop".into()), ("delta_p_mw".into(), "15".into())]);
    assert_eq!(b[1].0[1].1, "30");
    assert_eq!(b[5].0[0].1, "matching");
    assert_eq!(b[4].1.events[0].delta_p_mw, 75.0);
    assert!(b.iter().all(|p| p.1.sweep.is_none()));
    assert_eq!(expand_sweep(&scenario("iv-d_1sm-2gfc_lpf.toml")).unwrap().len(), 6);
    assert_eq!(expand_sweep(&scenario("iv-e_1sm-2gfc_no-pss.toml")).unwrap().len(), 4);
}

#[test]
fn trajectory_csv_is_byte_identical_across_runs() {
    let s = short(scenario("iv-a_all-gfc_hac.toml"), 0.4);
    let csv = || {
        let r = run(&s).unwrap();
        let mut out = Vec::new();
        write_trajectory(&mut out, &r.times, &r.channels).unwrap();
        out
    };
    let a = csv();
    assert!(a.len() > 1000);
    assert_eq!(a, csv());
}

#[test]
fn shipped_scenarios_round_trip_through_toml() {
    for entry in fs::read_dir(repo_root().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "analyze2c.toml" {
            continue;
        }
        let s = ScenarioSpec::load(&path).unwrap();
        let back = ScenarioSpec::parse(&s.to_toml(), "round-trip").unwrap();
        assert_eq!(s, back, "{}", path.display());
    }
}

#[test]
fn strategy_names_round_trip() {
    let base = scenario("iv-a_all-gfc_hac.toml");
    for k in [StrategyKind::Droop, StrategyKind::Matching, StrategyKind::Hac] {
        let mut s = base.clone();
        s.units[0].strategy = Some(k);
        let text = s.to_toml();
        assert!(text.contains(&format!("strategy = \"{}\"", k.as_str())));
        assert_eq!(ScenarioSpec::parse(&text, "t").unwrap().units[0].strategy, Some(k));
    }
}

#[test]
fn config_errors_name_the_field() {
    let text = fs::read_to_string(repo_root().join("scenarios/iv-a_all-gfc_hac.toml")).unwrap();
    let bad = text.replace("horizon_s = 5.0", "horizon_s = -1.0");
    let err = ScenarioSpec::parse(&bad, "t").unwrap_err();
    assert!(err.to_string().contains("horizon_s"), "{err}");

    let bad = text.replacen("strategy = \"hac\"", "strategy = \"fast\"", 1);
    assert!(matches!(ScenarioSpec::parse(&bad, "t"), Err(Error::Parse { .. })));

    let bad = text.replace("bus = 7", "bus = 42");
    let s = ScenarioSpec::parse(&bad, "t").unwrap();
    assert!(matches!(build_system(&s), Err(Error::Config(_))));
}

#[test]
fn load_step_lowers_frequency_and_every_gfc_records_omega() {
    let r = run(&short(scenario("iv-a_all-gfc_hac.toml"), 0.6)).unwrap();
    for d in ["gfc1", "gfc2", "gfc3"] {
        let w = r.channel(d, "omega").unwrap();
        assert_eq!(w.len(), r.times.len());
        assert!(w.last().unwrap() < &common::W0);
    }
    assert!(r.metrics.max_freq_deviation > 0.0);
}
