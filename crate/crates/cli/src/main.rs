//! `gridform` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 instability detected in
//! a simulation (outputs are still written), 3 gain thresholds not found.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use gridform::analysis::{certify, estimate_gain_thresholds, ic_grid, Threshold};
use gridform::io::{
    sha256_hex, thresholds_text, write_certification_csv, write_metrics, write_sweep_summary, write_trajectory,
    Analyze2cSpec, Manifest,
};
use gridform::metrics::StabilityFlag;
use gridform::scenarios::{run, sweep, ScenarioSpec, SimResult};
use gridform::Error;

#[derive(Parser)]
#[command(name = "gridform", version, about = "Low-inertia grid simulator with grid-forming converters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Integration step (s), overrides the scenario.
        #[arg(long)]
        h: Option<f64>,
        /// Simulated time after settling (s), overrides the scenario.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Run every point of the scenario's [sweep] grid.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Certify the reduced two-converter model and estimate gain thresholds.
    Analyze2c {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_UNSTABLE: u8 = 2;
const EXIT_NO_THRESHOLD: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let started = Instant::now();
    let res = match &cli.command {
        Command::Simulate { config, out, h, horizon } => simulate(config, out, *h, *horizon, started),
        Command::Sweep { config, out } => cmd_sweep(config, out, started),
        Command::Analyze2c { config, out } => analyze2c(config, out, started),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Settle(_) | Error::Integration(_) => EXIT_UNSTABLE,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn config_hash(path: &Path) -> Result<String, Error> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn manifest(command: &str, config: &Path, started: Instant, outputs: Vec<String>) -> Result<Manifest, Error> {
    Ok(Manifest {
        command: command.to_string(),
        config_path: config.display().to_string(),
        config_sha256: config_hash(config)?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: started.elapsed().as_secs_f64(),
        outputs,
    })
}

/// Writes trajectory and metrics of one run into `dir`; returns the file
/// names relative to `base`.
fn write_run(result: &SimResult, dir: &Path, base: &Path) -> Result<Vec<String>, Error> {
    fs::create_dir_all(dir)?;
    let traj = dir.join("trajectory.csv");
    write_trajectory(BufWriter::new(File::create(&traj)?), &result.times, &result.channels)?;
    let met = dir.join("metrics.csv");
    write_metrics(BufWriter::new(File::create(&met)?), &result.spec.name, &result.metrics)?;
    let diag = dir.join("diagnostics.json");
    fs::write(
        &diag,
        serde_json::to_string_pretty(&result.diagnostics).map_err(|e| Error::Usage(e.to_string()))? + "\n",
    )?;
    Ok([traj, met, diag]
        .iter()
        .map(|p| p.strip_prefix(base).unwrap_or(p).display().to_string())
        .collect())
}

fn unstable(r: &SimResult) -> bool {
    r.metrics.stability == StabilityFlag::Diverged || r.diagnostics.integration_error.is_some()
}

fn simulate(config: &Path, out: &Path, h: Option<f64>, horizon: Option<f64>, started: Instant) -> Result<u8, Error> {
    let mut spec = ScenarioSpec::load(config)?;
    if let Some(h) = h {
        spec.integrator.h_s = h;
    }
    if let Some(t) = horizon {
        spec.horizon_s = t;
    }
    spec.validate()?;
    let result = run(&spec)?;
    let mut outputs = write_run(&result, out, out)?;
    outputs.push("manifest.json".into());
    manifest("simulate", config, started, outputs)?.write(out)?;

    let m = &result.metrics;
    println!(
        "{}: {} (max |Δω| {:.4} rad/s, RoCoF {:.3} rad/s², settling {})",
        spec.name,
        m.stability.as_str(),
        m.max_freq_deviation,
        m.rocof,
        m.settling_time.map_or("n/a".into(), |t| format!("{t:.3} s"))
    );
    if let Some(e) = &result.diagnostics.integration_error {
        println!("integration stopped: {e}");
    }
    Ok(if unstable(&result) { EXIT_UNSTABLE } else { 0 })
}

fn cmd_sweep(config: &Path, out: &Path, started: Instant) -> Result<u8, Error> {
    let spec = ScenarioSpec::load(config)?;
    let points = sweep(&spec)?;
    fs::create_dir_all(out)?;
    let mut outputs = vec!["summary.csv".to_string()];
    for p in &points {
        let labels: Vec<String> = p.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
        match &p.result {
            Ok(r) => {
                outputs.extend(write_run(r, &out.join(format!("point_{:03}", p.index)), out)?);
                println!("[{:3}] {}: {}", p.index, labels.join(" "), r.metrics.stability.as_str());
            }
            Err(e) => println!("[{:3}] {}: failed: {e}", p.index, labels.join(" ")),
        }
    }
    write_sweep_summary(BufWriter::new(File::create(out.join("summary.csv"))?), &points)?;
    outputs.push("manifest.json".into());
    manifest("sweep", config, started, outputs)?.write(out)?;
    if points.iter().any(|p| p.result.is_ok()) {
        Ok(0)
    } else {
        eprintln!("error: every sweep point failed");
        Ok(EXIT_USAGE)
    }
}

fn analyze2c(config: &Path, out: &Path, started: Instant) -> Result<u8, Error> {
    let spec = Analyze2cSpec::load(config)?;
    let grid = ic_grid(&spec.params, &spec.grid.angle_offsets, &spec.grid.dc_fracs);
    let report = certify(&spec.params, &grid, &spec.certify)?;
    let thresholds = estimate_gain_thresholds(&spec.params, &grid, &spec.certify, &spec.search)?;

    fs::create_dir_all(out)?;
    let text = format!("name = {}\n{}{}", spec.name, report.to_text(), thresholds_text(&thresholds));
    fs::write(out.join("certification.txt"), &text)?;
    write_certification_csv(BufWriter::new(File::create(out.join("certification.csv"))?), &report)?;
    let outputs = vec!["certification.txt".into(), "certification.csv".into(), "manifest.json".into()];
    manifest("analyze2c", config, started, outputs)?.write(out)?;

    print!("{text}");
    let missing = [thresholds.gamma_ac_min, thresholds.kappa_dc_min]
        .iter()
        .any(|t| matches!(t, Threshold::NotFound));
    Ok(if missing { EXIT_NO_THRESHOLD } else { 0 })
}
