//! `relax`: simulations, ε-sweeps, lemma studies and ad-hoc distances.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use relax_core::config::Config;
use relax_core::energetics::{energy_report, neg_sobolev_sq, norm, NormKind};
use relax_core::euler_riesz::run_er;
use relax_core::fpme::run_fpme;
use relax_core::metrics::{
    bounded_lipschitz, wasserstein2_1d, wasserstein2_entropic, wasserstein2_torus_1d, Geometry, GridMeasure,
    Support,
};
use relax_core::report::{limit_row, write_csv, CsvRow};
use relax_core::sweep::run_sweep;
use relax_core::trajectory::{StepRecord, StoredTrajectory};
use relax_core::verify::{run_study, Study};
use relax_core::{RelaxError, Result};

#[derive(Parser)]
#[command(name = "relax", version, about = "Damped Euler–Riesz relaxation laboratory")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RELAX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the damped Euler–Riesz system for a single ε.
    SimulateEr(RunArgs),
    /// Run the fractional porous medium limit.
    SimulateFpme(RunArgs),
    /// Run the limit once and the relaxed system for every ε, then fit the rate.
    Sweep(RunArgs),
    /// Run a seeded lemma study and print its JSON report.
    Verify(VerifyArgs),
    /// Distances between one field of two stored trajectories.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overwrite outputs produced from a different config.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// commutator, hls, extension, lower_bounds or metric_sanity.
    study: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to DIR/verify_<study>.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Torus,
    Segment,
}

#[derive(Args)]
struct MetricsArgs {
    a: PathBuf,
    b: PathBuf,
    /// Snapshot index in the first file.
    #[arg(long, default_value_t = 0)]
    snapshot: usize,
    /// Snapshot index in the second file (defaults to --snapshot).
    #[arg(long)]
    snapshot_b: Option<usize>,
    #[arg(long, default_value = "rho")]
    field: String,
    #[arg(long, value_enum, default_value = "torus")]
    geometry: GeometryArg,
    /// Riesz exponent of the negative Sobolev distance.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({ "kind": "threads", "message": e.to_string() }));
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::SimulateEr(a) => simulate_er(&a),
        Command::SimulateFpme(a) => simulate_fpme(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Verify(a) => verify(&a),
        Command::Metrics(a) => metrics(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let mut report = json!({ "kind": e.kind(), "message": e.to_string() });
            if let RelaxError::Config { key, .. } = &e {
                report["key"] = json!(key);
            }
            eprintln!("{report}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

/// Creates `out` and checks that an existing manifest was written for the
/// same config.
fn prepare_out(out: &Path, hash: &str, force: bool) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = out.join("manifest.json");
    if manifest.exists() && !force {
        let text = fs::read_to_string(&manifest)?;
        let old: Value = serde_json::from_str(&text).map_err(|e| RelaxError::Format(e.to_string()))?;
        if old.get("config_hash").and_then(Value::as_str) != Some(hash) {
            return Err(RelaxError::HashMismatch(out.display().to_string()));
        }
    }
    Ok(())
}

fn write_manifest(out: &Path, command: &str, hash: &str, seed: u64, files: &[String]) -> Result<()> {
    let manifest = json!({
        "command": command,
        "config_hash": hash,
        "seed": seed,
        "files": files,
    });
    write_text(&out.join("manifest.json"), &pretty(&manifest))
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_rows(path: &Path, dim: usize, rows: &[CsvRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&mut w, dim, rows)?;
    w.flush()?;
    Ok(())
}

fn write_steps(path: &Path, steps: &[StepRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,dt,energy_before,energy_after,truncation,dissipation")?;
    for s in steps {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.time, s.dt, s.energy_before, s.energy_after, s.truncation, s.dissipation
        )?;
    }
    w.flush()?;
    Ok(())
}

fn simulate_er(a: &RunArgs) -> Result<bool> {
    let cfg = Config::load(&a.config)?;
    let params = cfg.params_for(cfg.single_epsilon()?)?;
    let hash = cfg.hash();
    prepare_out(&a.out, &hash, a.force)?;
    let init = cfg.initial_state(&params)?;
    let traj = run_er(&init, &params, &cfg.step_policy()?, &cfg.schedule()?, &mut [])?;
    let rows = traj
        .snapshots
        .iter()
        .map(|s| energy_report(s, None, &params).map(|r| CsvRow::from(&r)))
        .collect::<Result<Vec<_>>>()?;
    let mut w = BufWriter::new(File::create(a.out.join("trajectory.bin"))?);
    traj.write_binary(&mut w)?;
    w.flush()?;
    write_rows(&a.out.join("energy.csv"), cfg.grid.dim, &rows)?;
    write_steps(&a.out.join("steps.csv"), &traj.steps)?;
    let files = ["trajectory.bin", "energy.csv", "steps.csv"].map(String::from);
    write_manifest(&a.out, "simulate-er", &hash, a.seed, &files)?;
    Ok(true)
}

fn simulate_fpme(a: &RunArgs) -> Result<bool> {
    let cfg = Config::load(&a.config)?;
    let params = cfg.params_for(cfg.single_epsilon()?)?;
    let hash = cfg.hash();
    prepare_out(&a.out, &hash, a.force)?;
    let rho0 = cfg.initial_state(&params)?.rho;
    let traj = run_fpme(&rho0, &params, cfg.step_policy()?.dt_max, &cfg.schedule()?, &mut [])?;
    let rows = traj
        .snapshots
        .iter()
        .map(|s| limit_row(s, &params))
        .collect::<Result<Vec<_>>>()?;
    let mut w = BufWriter::new(File::create(a.out.join("trajectory.bin"))?);
    traj.write_binary(&mut w)?;
    w.flush()?;
    write_rows(&a.out.join("energy.csv"), cfg.grid.dim, &rows)?;
    let files = ["trajectory.bin", "energy.csv"].map(String::from);
    write_manifest(&a.out, "simulate-fpme", &hash, a.seed, &files)?;
    Ok(true)
}

fn sweep(a: &RunArgs) -> Result<bool> {
    let cfg = Config::load(&a.config)?;
    let hash = cfg.hash();
    prepare_out(&a.out, &hash, a.force)?;
    let out = run_sweep(&cfg, a.seed)?;
    let mut files = vec!["sweep.json".to_string()];
    for (eps, rows) in out.result.epsilons.iter().zip(&out.rows) {
        let name = format!("epsilon_{eps}.csv");
        write_rows(&a.out.join(&name), cfg.grid.dim, rows)?;
        files.push(name);
    }
    write_text(&a.out.join("sweep.json"), &pretty(&out.result))?;
    write_manifest(&a.out, "sweep", &hash, a.seed, &files)?;
    if let Some(note) = &out.result.fit_note {
        eprintln!("{}", json!({ "kind": "rate_fit", "message": note }));
    }
    Ok(true)
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let study: Study = a.study.parse()?;
    let report = run_study(study, a.seed)?;
    let text = pretty(&report);
    if let Some(out) = &a.out {
        let hash = format!("verify:{}:{}", study.name(), a.seed);
        prepare_out(out, &hash, a.force)?;
        let name = format!("verify_{}.json", study.name());
        write_text(&out.join(&name), &text)?;
        write_manifest(out, "verify", &hash, a.seed, &[name])?;
    }
    print!("{text}");
    Ok(report.pass)
}

fn load_field(path: &Path, snapshot: usize, field: &str) -> Result<(f64, relax_core::Field)> {
    let traj = StoredTrajectory::read(&mut std::io::BufReader::new(File::open(path)?))?;
    let f = traj.field(snapshot, field).cloned().ok_or_else(|| {
        RelaxError::Format(format!("{}: no field `{field}` at snapshot {snapshot}", path.display()))
    })?;
    Ok((traj.snapshots[snapshot].0, f))
}

fn metrics(a: &MetricsArgs) -> Result<bool> {
    let (ta, fa) = load_field(&a.a, a.snapshot, &a.field)?;
    let (tb, fb) = load_field(&a.b, a.snapshot_b.unwrap_or(a.snapshot), &a.field)?;
    if fa.grid() != fb.grid() {
        return Err(RelaxError::GridMismatch("the two files use different grids".into()));
    }
    let geometry = match a.geometry {
        GeometryArg::Torus => Geometry::Torus,
        GeometryArg::Segment => Geometry::LineSegment,
    };
    let diff = &fa - &fb;
    let (mu, nu) = (GridMeasure::from_field(&fa, geometry), GridMeasure::from_field(&fb, geometry));
    let nonnegative = fa.values().iter().chain(fb.values()).all(|v| *v >= 0.0);
    let w2 = if !nonnegative {
        None
    } else if fa.grid().dim() == 1 {
        Some(match geometry {
            Geometry::Torus => wasserstein2_torus_1d(&mu, &nu, Support::Cells)?,
            Geometry::LineSegment => wasserstein2_1d(&mu, &nu, Support::Cells)?,
        })
    } else if fa.grid().n() <= 64 {
        let h = fa.grid().spacing();
        Some(wasserstein2_entropic(&mu, &nu, 2.0 * h * h)?.w2_sq.max(0.0).sqrt())
    } else {
        None
    };
    let report = json!({
        "field": a.field,
        "t_a": ta,
        "t_b": tb,
        "l1": norm(&diff, NormKind::L1)?,
        "l2": norm(&diff, NormKind::L2)?,
        "bounded_lipschitz": bounded_lipschitz(&mu, &nu)?.value,
        "w2": w2,
        "neg_sobolev_sq": neg_sobolev_sq(&fa, &fb, a.alpha).ok(),
    });
    print!("{}", pretty(&report));
    Ok(true)
}
