//! The `pgdvhl` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pgd_vhl::postprocess::{self, RecoveryReport, GRID_FACTOR};
use pgd_vhl::{
    pgd_solver, Instance, ProblemDims, SensingOperator, SolverConfig, StopReason, SubspaceKind,
    Truth,
};
use serde::Serialize;

use crate::experiments::{self, CellResult, TrialRecord};
use crate::output::{self, CsvSink, CELL_COLUMNS};
use crate::spec::{parse_list, ConfigFile, ExperimentKind, ExperimentSpec, Separation};

#[derive(Debug, Parser)]
#[command(
    name = "pgdvhl",
    version,
    about = "Blind super-resolution experiments with PGD-VHL"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Success rate over an (s, r) grid at fixed n; writes cells.csv.
    PhaseSr(SweepArgs),
    /// Success rate over an (n, s) grid at fixed r; writes cells.csv.
    PhaseNs(SweepArgs),
    /// Success rate over an (n, r) grid at fixed s; writes cells.csv.
    PhaseNr(SweepArgs),
    /// Per-iteration traces for each n; writes trace_<n>.csv.
    Converge(SweepArgs),
    /// Relative error against noise level; writes noise.csv.
    Noise(SweepArgs),
    /// Solve one instance stored as JSON; writes result.json and trace_<n>.csv.
    Solve(SolveArgs),
    /// Generate an instance JSON file for `solve`.
    Instance(InstanceArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Signal lengths: `64`, `64,128` or `32..128`.
    #[arg(long)]
    pub n: Option<String>,
    /// Subspace dimensions.
    #[arg(long)]
    pub s: Option<String>,
    /// Model orders.
    #[arg(long)]
    pub r: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum location separation: `none` or `1overn`.
    #[arg(long)]
    pub sep: Option<Separation>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file with grid and solver overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Suppress per-cell progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance JSON, as written by `pgdvhl instance`.
    pub instance: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// TOML file; only its `[solver]` table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MUSIC grid points (default 16 n).
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1overn")]
    pub sep: Separation,
    /// Relative noise level sigma_e.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value = "dft-rows")]
    pub subspace: SubspaceKind,
    /// Output file.
    #[arg(long, default_value = "instance.json")]
    pub out: PathBuf,
}

/// Resolves defaults, the config file and flags into a spec and thread count.
pub fn resolve_spec(
    kind: ExperimentKind,
    args: &SweepArgs,
) -> Result<(ExperimentSpec, Option<usize>)> {
    let mut spec = ExperimentSpec::defaults(kind);
    let mut threads = None;
    if let Some(path) = &args.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = ConfigFile::parse(&text)?;
        cfg.apply(&mut spec)?;
        threads = cfg.threads;
    }
    if let Some(v) = &args.n {
        spec.n = parse_list(v).context("--n")?;
    }
    if let Some(v) = &args.s {
        spec.s = parse_list(v).context("--s")?;
    }
    if let Some(v) = &args.r {
        spec.r = parse_list(v).context("--r")?;
    }
    if let Some(v) = args.trials {
        spec.trials = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.sep {
        spec.separation = v;
    }
    if args.threads.is_some() {
        threads = args.threads;
    }
    spec.validate()?;
    Ok((spec, threads))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        if k == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(k);
    }
    Ok(builder.build()?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Runs a sweep subcommand and returns the files written.
pub fn run_sweep(kind: ExperimentKind, args: &SweepArgs) -> Result<Vec<PathBuf>> {
    let (spec, threads) = resolve_spec(kind, args)?;
    let pool = pool(threads)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json(&args.out.join("spec.json"), &spec)?;
    let mut written = vec![args.out.join("spec.json")];
    match kind {
        ExperimentKind::Convergence => {
            for run in experiments::convergence_study(&spec, &pool)? {
                let path = args.out.join(format!("trace_{}.csv", run.n));
                output::write_trace(&path, &run.trace)?;
                if !args.quiet {
                    eprintln!(
                        "n = {}: {} iterations, relative error {:.3e}, stop {:?}",
                        run.n,
                        run.trace.records.len().saturating_sub(1),
                        run.rel_err,
                        run.stop
                    );
                }
                written.push(path);
            }
        }
        _ => {
            let (file, schema) = if kind == ExperimentKind::Noise {
                ("noise.csv", "noise")
            } else {
                ("cells.csv", "cells")
            };
            let path = args.out.join(file);
            let mut sink = CsvSink::create(&path, schema, &CELL_COLUMNS)?;
            let name = kind.name();
            let quiet = args.quiet;
            let on_cell = |c: &CellResult, trials: &[TrialRecord]| {
                if quiet {
                    return sink.row(&output::cell_row(name, c));
                }
                for t in trials.iter().filter(|t| t.error.is_some()) {
                    eprintln!(
                        "trial {} of {:?} failed: {}",
                        t.trial,
                        c.cell,
                        t.error.as_deref().unwrap_or("")
                    );
                }
                eprintln!(
                    "n={} s={} r={} sigma={:.1e}: {}/{} succeeded",
                    c.cell.n, c.cell.s, c.cell.r, c.cell.sigma, c.successes, c.trials
                );
                sink.row(&output::cell_row(name, c))
            };
            if kind == ExperimentKind::Noise {
                experiments::noise_study(&spec, &pool, on_cell)?;
            } else {
                experiments::phase_transition(&spec, &pool, on_cell)?;
            }
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub dims: ProblemDims,
    pub stop: StopReason,
    pub iterations: usize,
    pub sigma1: f64,
    /// `||X_hat - X||_F / ||X||_F` against the instance's own sources.
    pub rel_err: f64,
    pub taus_true: Vec<f64>,
    pub recovery: RecoveryReport,
}

pub fn run_solve(args: &SolveArgs) -> Result<SolveSummary> {
    let text = fs::read_to_string(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let inst = Instance::from_json(&text)?;
    let p = inst.materialize()?;
    let mut config = if inst.noise_level > 0.0 {
        SolverConfig::noisy()
    } else {
        SolverConfig::default()
    };
    if let Some(path) = &args.config {
        let cfg = ConfigFile::parse(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?;
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PhaseSr);
        spec.solver = config;
        cfg.apply(&mut spec)?;
        config = spec.solver;
    }
    let op = SensingOperator::new(&p.subspace, &p.dims)?;
    let truth = Truth::new(&p.x_true, &p.dims)?;
    let out = pgd_solver::solve(&op, &p.measurements, &config, Some(&truth))?;
    let grid = args.grid.unwrap_or(GRID_FACTOR * p.dims.n);
    let rec = postprocess::recover(&out.x_hat, &p.measurements, &p.subspace, &p.dims, grid)?;
    let summary = SolveSummary {
        dims: p.dims,
        stop: out.stop,
        iterations: out.iterations,
        sigma1: out.sigma1,
        rel_err: (&out.x_hat - &p.x_true).norm() / p.x_true.norm(),
        taus_true: {
            let mut t = p.sources.taus.clone();
            t.sort_by(f64::total_cmp);
            t
        },
        recovery: rec.report(),
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json(&args.out.join("result.json"), &summary)?;
    output::write_trace(
        &args.out.join(format!("trace_{}.csv", p.dims.n)),
        &out.trace,
    )?;
    Ok(summary)
}

pub fn run_instance(args: &InstanceArgs) -> Result<Instance> {
    let dims = ProblemDims::new(args.n, args.s, args.r)?;
    let inst = Instance::generate(
        dims,
        args.subspace,
        args.seed,
        args.sep.min_sep(args.n),
        args.sigma,
    )?;
    fs::write(&args.out, inst.to_json() + "\n")
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(inst)
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::PhaseSr(a) => report(run_sweep(ExperimentKind::PhaseSr, a)?),
        Command::PhaseNs(a) => report(run_sweep(ExperimentKind::PhaseNs, a)?),
        Command::PhaseNr(a) => report(run_sweep(ExperimentKind::PhaseNr, a)?),
        Command::Converge(a) => report(run_sweep(ExperimentKind::Convergence, a)?),
        Command::Noise(a) => report(run_sweep(ExperimentKind::Noise, a)?),
        Command::Solve(a) => {
            let s = run_solve(a)?;
            eprintln!(
                "{:?} after {} iterations; relative error {:.3e}; locations {:?}",
                s.stop, s.iterations, s.rel_err, s.recovery.taus_hat
            );
            report(vec![
                a.out.join("result.json"),
                a.out.join(format!("trace_{}.csv", s.dims.n)),
            ])
        }
        Command::Instance(a) => {
            run_instance(a)?;
            report(vec![a.out.clone()])
        }
    }
}

fn report(paths: Vec<PathBuf>) -> Result<()> {
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn main_with<I, T>(args: I) -> std::process::ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                std::process::ExitCode::from(2)
            } else {
                std::process::ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
