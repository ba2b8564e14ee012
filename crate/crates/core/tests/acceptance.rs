//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs every shipped scenario, so it takes a minute or two. Criteria listed
//! in `KNOWN_FAILURES` are evaluated and reported like the others but do not
//! fail the run; the README explains each one. Any other failure exits 1.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use gridform::analysis::{certify, equilibrium, estimate_gain_thresholds, ic_grid, Threshold};
use gridform::io::{write_trajectory, Analyze2cSpec};
use gridform::metrics::StabilityFlag;
use gridform::numerics::{clarke, inverse_clarke, rotate};
use gridform::scenarios::bench::TwoConverterBench;
use gridform::scenarios::{run, sweep, SimResult, SweepPoint};

use common::{label, nadir, ok, repo_root, rocof, scenario};

const KNOWN_FAILURES: [u32; 3] = [5, 7, 9];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: u32, title: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} criterion {id} ({title}): {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome {
        id,
        title,
        pass,
        detail,
    }
}

fn rel_spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max
}

fn trajectory_bytes(r: &SimResult) -> Vec<u8> {
    let mut out = Vec::new();
    write_trajectory(&mut out, &r.times, &r.channels).unwrap();
    out
}

fn main() {
    let started = Instant::now();
    let mut outcomes = Vec::new();

    // 1
    let t = Instant::now();
    let worst = common::eq6_worst();
    let secs = t.elapsed().as_secs_f64();
    outcomes.push(report(
        1,
        "measured angle identity",
        worst < 1e-9 && secs < 1.0,
        format!("max |measured - ideal| = {worst:.2e} (< 1e-9), {secs:.3} s (< 1 s)"),
    ));

    // 2
    let errs = common::equilibrium_errors();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let listed: Vec<String> = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    outcomes.push(report(
        2,
        "equilibrium exactness",
        worst < 1e-12,
        format!("|omega_c - omega_0| at reference: {} (< 1e-12)", listed.join(", ")),
    ));

    // run everything shipped
    let t = Instant::now();
    let iv_a = run(&scenario("iv-a_all-gfc_hac.toml")).expect("IV-A runs");
    let iv_a_secs = t.elapsed().as_secs_f64();
    let iv_c_single = run(&scenario("iv-c_2sm-1gfc_droop.toml")).expect("IV-C droop runs");
    let sweeps: BTreeMap<&str, Vec<SweepPoint>> = [
        "iv-b_1sm-2gfc_sweep.toml",
        "iv-c_2sm-1gfc_sweep.toml",
        "iv-d_1sm-2gfc_lpf.toml",
        "iv-e_1sm-2gfc_no-pss.toml",
    ]
    .into_iter()
    .map(|f| (f, sweep(&scenario(f)).expect("sweep expands")))
    .collect();

    // 3
    let mut residual = iv_a.diagnostics.max_stage_residual.max(iv_c_single.diagnostics.max_stage_residual);
    let mut runs = 2;
    for p in sweeps.values().flatten() {
        residual = residual.max(ok(p).diagnostics.max_stage_residual);
        runs += 1;
    }
    outcomes.push(report(
        3,
        "losslessness",
        residual < 1e-12,
        format!("max relative stage power residual {residual:.2e} over {runs} runs (< 1e-12)"),
    ));

    // 4
    let m = &iv_a.metrics;
    let settle = m.settling_time.unwrap_or(f64::INFINITY);
    let sharing = m.sharing_error.unwrap_or(f64::INFINITY);
    outcomes.push(report(
        4,
        "IV-A reproduction",
        settle <= 0.5 && sharing < 0.01 && iv_a_secs < 60.0,
        format!(
            "settling {settle:.3} s (<= 0.5 s), sharing error {sharing:.4} pu (< 0.01), run {iv_a_secs:.1} s (< 60 s)"
        ),
    ));

    // 5
    let b = &sweeps["iv-b_1sm-2gfc_sweep.toml"];
    let at = |strategy: &str, dp: &str| {
        ok(b.iter()
            .find(|p| label(p, "strategy") == strategy && label(p, "delta_p_mw") == dp)
            .unwrap())
    };
    let mut rocof_ok = true;
    let mut spread_ok = true;
    let mut parts = Vec::new();
    for dp in ["15", "30", "45", "60", "75"] {
        let (d, mt, h) = (at("droop", dp), at("matching", dp), at("hac", dp));
        rocof_ok &= rocof(mt, "sm1") >= rocof(d, "sm1") && rocof(mt, "sm1") >= rocof(h, "sm1");
        let spread = rel_spread(&[nadir(d, "sm1"), nadir(mt, "sm1"), nadir(h, "sm1")]);
        spread_ok &= spread <= 0.25;
        parts.push(format!("{dp} MW {:.0}%", spread * 100.0));
    }
    outcomes.push(report(
        5,
        "IV-B ordering",
        rocof_ok && spread_ok,
        format!(
            "RoCoF ordering {}; sm1 nadir spread (<= 25%): {}",
            if rocof_ok { "holds" } else { "violated" },
            parts.join(", ")
        ),
    ));

    // 6
    let c = &sweeps["iv-c_2sm-1gfc_sweep.toml"];
    let by = |s: &str| ok(c.iter().find(|p| label(p, "strategy") == s).unwrap());
    let (d, mt, h) = (by("droop"), by("matching"), by("hac"));
    let flags = [d, mt, h].map(|r| r.metrics.stability);
    let pass = flags == [StabilityFlag::Diverged, StabilityFlag::Settled, StabilityFlag::Settled]
        && nadir(h, "sm1") <= nadir(mt, "sm1");
    outcomes.push(report(
        6,
        "IV-C robustness",
        pass,
        format!(
            "droop {}, matching {}, hac {}; sm1 max deviation hac {:.3} <= matching {:.3} rad/s",
            flags[0].as_str(),
            flags[1].as_str(),
            flags[2].as_str(),
            nadir(h, "sm1"),
            nadir(mt, "sm1")
        ),
    ));

    // 7
    let dsw = &sweeps["iv-d_1sm-2gfc_lpf.toml"];
    let order = ["none", "5", "2", "1", "0.5", "0.2"];
    let nadirs: Vec<f64> = order
        .iter()
        .map(|f| nadir(ok(dsw.iter().find(|p| label(p, "lpf_hz") == *f).unwrap()), "sm1"))
        .collect();
    let monotone = nadirs.windows(2).all(|w| w[1] <= w[0]);
    let ratio = nadirs[5] / nadirs[0];
    let listed: Vec<String> = order.iter().zip(&nadirs).map(|(f, n)| format!("{f}: {n:.3}")).collect();
    outcomes.push(report(
        7,
        "IV-D filter monotonicity",
        monotone && ratio < 0.5,
        format!(
            "sm1 nadir by cutoff [{}] rad/s {}; nadir(0.2)/nadir(none) = {ratio:.3} (< 0.5)",
            listed.join(", "),
            if monotone { "non-increasing" } else { "NOT monotone" }
        ),
    ));

    // 8
    let e = &sweeps["iv-e_1sm-2gfc_no-pss.toml"];
    let at = |s: &str, f: &str| ok(e.iter().find(|p| label(p, "strategy") == s && label(p, "lpf_hz") == f).unwrap());
    let mut pass = true;
    let mut parts = Vec::new();
    for s in ["droop", "hac"] {
        let (slow, fast) = (at(s, "0.2"), at(s, "5"));
        pass &= slow.metrics.stability != StabilityFlag::Diverged && nadir(slow, "sm1") < nadir(fast, "sm1");
        parts.push(format!(
            "{s} 0.2 Hz {} nadir {:.3} vs 5 Hz {:.3}",
            slow.metrics.stability.as_str(),
            nadir(slow, "sm1"),
            nadir(fast, "sm1")
        ));
    }
    outcomes.push(report(8, "IV-E without PSS", pass, parts.join("; ")));

    // 9
    let spec = Analyze2cSpec::load(&repo_root().join("scenarios/analyze2c.toml")).unwrap();
    let grid = ic_grid(&spec.params, &spec.grid.angle_offsets, &spec.grid.dc_fracs);
    let cert = certify(&spec.params, &grid, &spec.certify).unwrap();
    let t = Instant::now();
    let th = estimate_gain_thresholds(&spec.params, &grid, &spec.certify, &spec.search).unwrap();
    let search_secs = t.elapsed().as_secs_f64();
    let above = |th: Threshold, gain: f64| th.value().is_some_and(|v| gain >= v);
    let gains_above = above(th.gamma_ac_min, spec.params.gamma_ac_sum())
        && above(th.kappa_dc_min, spec.params.sides[0].kappa_dc.min(spec.params.sides[1].kappa_dc));
    outcomes.push(report(
        9,
        "two-converter certification",
        cert.monotone_fraction == 1.0 && cert.converged_fraction == 1.0 && gains_above && search_secs < 300.0,
        format!(
            "R = {} ohm: monotone {:.3}, converged {:.3} (both 1.0); thresholds gamma_ac {:?}, kappa_dc {:?}; search {search_secs:.1} s (< 300 s)",
            spec.params.r, cert.monotone_fraction, cert.converged_fraction, th.gamma_ac_min, th.kappa_dc_min
        ),
    ));

    // 10
    let order = common::rk4_order();
    let mut frames = 0.0f64;
    for k in 0..1000 {
        let x = k as f64 * 0.731;
        let abc = [1e3 * x.sin(), -400.0 * (2.0 * x).cos(), 250.0 * (x + 1.0).sin()];
        // the zero-sequence component is dropped by the transform
        let mean = (abc[0] + abc[1] + abc[2]) / 3.0;
        let back = inverse_clarke(clarke(abc));
        for p in 0..3 {
            frames = frames.max((back[p] - (abc[p] - mean)).abs() / 1e3);
        }
        let v = [abc[0], abc[1]];
        let r = rotate(rotate(v, x), -x);
        frames = frames.max((r[0] - v[0]).abs().max((r[1] - v[1]).abs()) / 1e3);
    }
    let again = run(&scenario("iv-a_all-gfc_hac.toml")).unwrap();
    let identical = trajectory_bytes(&iv_a) == trajectory_bytes(&again);
    outcomes.push(report(
        10,
        "numerics",
        (3.7..=4.3).contains(&order) && frames < 1e-12 && identical,
        format!(
            "RK4 order {order:.3} (3.7..4.3); frame round-trip error {frames:.1e} (< 1e-12); repeated IV-A trajectory CSV {}",
            if identical { "byte-identical" } else { "DIFFERS" }
        ),
    ));

    // 11
    let mut p = gridform::analysis::TwoConverterParams::table_scaled();
    p.delta_r = 0.0238;
    for s in &mut p.sides {
        s.g_dc = 0.166;
    }
    p.sides[1].mu = 0.38;
    p.sides[1].kappa_dc = 800.0;
    let eq = equilibrium(&p, p.reference()).unwrap();
    let full = TwoConverterBench::new(p).run().unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let errs = [rel(full.delta, eq.delta), rel(full.v_dc_1, eq.v_dc_1), rel(full.v_dc_2, eq.v_dc_2)];
    outcomes.push(report(
        11,
        "cross-model consistency",
        errs.iter().all(|&e| e < 0.01),
        format!(
            "relative error delta {:.2e}, v_dc1 {:.2e}, v_dc2 {:.2e} (< 1e-2)",
            errs[0], errs[1], errs[2]
        ),
    ));

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    let unexpected: Vec<&&Outcome> = failed.iter().filter(|o| !KNOWN_FAILURES.contains(&o.id)).collect();
    println!(
        "{} of {} criteria pass ({:.0} s); known failures: {:?}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        started.elapsed().as_secs_f64(),
        KNOWN_FAILURES
    );
    for o in outcomes.iter().filter(|o| o.pass && KNOWN_FAILURES.contains(&o.id)) {
        println!("note: criterion {} ({}) now passes; remove it from KNOWN_FAILURES", o.id, o.title);
    }
    if !unexpected.is_empty() {
        for o in unexpected {
            eprintln!("unexpected failure: criterion {} ({}): {}", o.id, o.title, o.detail);
        }
        std::process::exit(1);
    }
}
