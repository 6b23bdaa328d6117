use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orbitcp_core::experiment::{
    all_guaranteed_ok, calibration_table, prepare, score_workspace, summarize, sweep, verify_checks, DatasetSource,
    RunConfig, CALIBRATION_COLUMNS, CHECK_COLUMNS, SUMMARY_COLUMNS,
};
use orbitcp_core::io::{export_ethucy, write_report, RunManifest, Table};
use orbitcp_core::{generate, load_config, GroupSpec, PredictorSpec, Result};
use serde::Serialize;

/// Split conformal calibration with rotation-equivariantized predictors.
#[derive(Debug, Parser)]
#[command(name = "orbitcp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibration quantiles and coverage for each provenance, alpha and split.
    Calibrate(Overrides),
    /// Paired-distribution checks; exits 1 if a guaranteed check fails.
    Verify(Overrides),
    /// Quantile and coverage for each of several groups.
    Sweep(Overrides),
    /// Writes the configured synthetic dataset as ETH-UCY text.
    GenData(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Miscoverage level; repeat for several.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    splits: Option<usize>,
    /// Group such as c4, c8 or so2:K=64:seed=7. For `sweep`, repeat to list
    /// the groups to compare; otherwise the first value is used.
    #[arg(long = "group")]
    groups: Vec<GroupSpec>,
    /// const-vel, pose-biased[:bx=..:by=..], polyfit:degree=N or external:<csv>.
    #[arg(long)]
    predictor: Option<PredictorSpec>,
    /// Run seed; also reseeds synthetic data.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Checks,
    Setup(orbitcp_core::Error),
}

impl From<orbitcp_core::Error> for Failure {
    fn from(e: orbitcp_core::Error) -> Self {
        Failure::Setup(e)
    }
}

fn resolve(o: &Overrides, sweeping: bool) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if !o.alphas.is_empty() {
        cfg.alphas = o.alphas.clone();
    }
    if let Some(s) = o.splits {
        cfg.splits = s;
    }
    if !o.groups.is_empty() {
        if sweeping {
            cfg.groups = o.groups.clone();
        } else {
            cfg.group = o.groups[0];
        }
    }
    if let Some(p) = &o.predictor {
        cfg.predictor = p.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
        if let DatasetSource::Synthetic(s) = &mut cfg.dataset {
            s.seed = seed;
        }
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, dataset_id: &str, tables: &[Table]) -> Result<()> {
    let mut manifest = RunManifest::new(&cfg.canonical(), cfg.seed, dataset_id);
    let path = write_report(&mut manifest, tables, &cfg.out)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn calibrate(o: &Overrides) -> Result<(), Failure> {
    let cfg = resolve(o, false)?;
    let ws = prepare(&cfg)?;
    let scores = score_workspace(&cfg, &ws)?;
    if !ws.supports_group() {
        eprintln!("note: external predictions cannot be evaluated on rotated inputs; only plain scores are reported");
    }
    let rows = calibration_table(&cfg, &ws, &scores)?;
    let summary = summarize(&rows);
    println!("{:<8} {:<16} {:<8} {:>18} {:>18}", "alpha", "provenance", "group", "Q (mean ± sd)", "coverage");
    for r in &summary {
        println!(
            "{:<8} {:<16} {:<8} {:>9.4} ± {:<6.4} {:>9.4} ± {:<6.4}",
            r.alpha,
            r.provenance.to_string(),
            r.group,
            r.q_mean,
            r.q_sd,
            r.coverage_mean,
            r.coverage_sd
        );
    }
    emit(
        &cfg,
        &ws.dataset_id,
        &[
            Table::from_records("calibration", &CALIBRATION_COLUMNS, &rows)?,
            Table::from_records("summary", &SUMMARY_COLUMNS, &summary)?,
        ],
    )?;
    Ok(())
}

fn verify(o: &Overrides) -> Result<(), Failure> {
    let cfg = resolve(o, false)?;
    let ws = prepare(&cfg)?;
    let scores = score_workspace(&cfg, &ws)?;
    let checks = verify_checks(&cfg, &ws, &scores)?;
    for c in &checks {
        let status = match (c.ok, c.guaranteed) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "flag",
        };
        println!(
            "{status:<5} {:<40} lhs={:<12.6e} rhs={:<12.6e} tol={:<9.2e} {}",
            c.check, c.lhs, c.rhs, c.tolerance, c.params
        );
    }
    emit(&cfg, &ws.dataset_id, &[Table::from_records("checks", &CHECK_COLUMNS, &checks)?])?;
    if all_guaranteed_ok(&checks) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn run_sweep(o: &Overrides) -> Result<(), Failure> {
    let cfg = resolve(o, true)?;
    let ws = prepare(&cfg)?;
    let res = sweep(&cfg, &ws)?;
    for r in &res.rows {
        println!(
            "alpha={:<6} {:<16} {:<18} Q={:.4} ± {:.4}  coverage={:.4} ± {:.4}",
            r.alpha,
            r.provenance.to_string(),
            r.group,
            r.q_mean,
            r.q_sd,
            r.coverage_mean,
            r.coverage_sd
        );
    }
    for n in &res.notes {
        println!("note: {n}");
    }
    let notes: Vec<_> = res.notes.iter().map(|n| NoteRow { note: n.clone() }).collect();
    emit(
        &cfg,
        &ws.dataset_id,
        &[
            Table::from_records("sweep", &SUMMARY_COLUMNS, &res.rows)?,
            Table::from_records("notes", &["note"], &notes)?,
        ],
    )?;
    Ok(())
}

#[derive(Serialize)]
struct NoteRow {
    note: String,
}

fn gen_data(o: &Overrides) -> Result<(), Failure> {
    let cfg = resolve(o, false)?;
    let DatasetSource::Synthetic(s) = &cfg.dataset else {
        return Err(orbitcp_core::Error::InvalidInput("gen-data needs a synthetic dataset config".into()).into());
    };
    let data = generate(s)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| orbitcp_core::Error::Io {
        path: cfg.out.clone(),
        source: e,
    })?;
    let path = cfg.out.join("trajectories.txt");
    export_ethucy(&data.samples, &path)?;
    let mut manifest = RunManifest::new(&cfg.canonical(), cfg.seed, format!("synthetic:{}", s.invariance));
    manifest.artifacts.push(file_name(&path));
    let orbits: Vec<_> = data
        .orbits
        .iter()
        .enumerate()
        .flat_map(|(o, members)| members.iter().map(move |&i| OrbitRow { sample: i, orbit: o }))
        .collect();
    write_report(&mut manifest, &[Table::from_records("orbits", &["sample", "orbit"], &orbits)?], &cfg.out)?;
    eprintln!("wrote {} samples to {}", data.samples.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct OrbitRow {
    sample: usize,
    orbit: usize,
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Calibrate(o) => calibrate(o),
        Command::Verify(o) => verify(o),
        Command::Sweep(o) => run_sweep(o),
        Command::GenData(o) => gen_data(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => {
            eprintln!("one or more guaranteed checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Setup(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
