//! Monte Carlo sweeps over problem sizes and noise levels.
//!
//! Every trial draws its instance and solver sketch from a seed derived from
//! `(master seed, n, s, r, noise index, trial)`, so the schedule of the worker
//! pool never influences results.

use std::time::Instant;

use anyhow::Result;
use pgd_vhl::pgd_solver::{self, PgdVhl};
use pgd_vhl::rng::{derive_seed, stream};
use pgd_vhl::{Instance, ProblemDims, SensingOperator, SolverConfig, SolverTrace, StepMode, Truth};
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::ExperimentSpec;

/// Coordinates of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub sigma: f64,
    /// Position of `sigma` in the noise grid; part of the seed path.
    pub sigma_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub cell: Cell,
    pub trial: usize,
    pub seed: u64,
    /// `None` when instance generation or the solver failed.
    pub rel_err: Option<f64>,
    pub success: bool,
    pub iterations: usize,
    pub millis: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    pub mean_rel_err: f64,
    pub median_rel_err: f64,
    pub mean_iterations: f64,
    pub mean_millis: f64,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    fn from_trials(cell: Cell, trials: &[TrialRecord]) -> Self {
        let count = trials.len();
        // failed solves count as relative error 1 (X_hat = 0)
        let mut errs: Vec<f64> = trials.iter().map(|t| t.rel_err.unwrap_or(1.0)).collect();
        errs.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            errs[count / 2]
        } else {
            0.5 * (errs[count / 2 - 1] + errs[count / 2])
        };
        let mean =
            |f: &dyn Fn(&TrialRecord) -> f64| trials.iter().map(f).sum::<f64>() / count as f64;
        CellResult {
            cell,
            trials: count,
            successes: trials.iter().filter(|t| t.success).count(),
            mean_rel_err: errs.iter().sum::<f64>() / count as f64,
            median_rel_err: median,
            mean_iterations: mean(&|t| t.iterations as f64),
            mean_millis: mean(&|t| t.millis),
        }
    }
}

pub fn trial_seed(master: u64, cell: &Cell, trial: usize) -> u64 {
    derive_seed(
        master,
        &[
            cell.n as u64,
            cell.s as u64,
            cell.r as u64,
            cell.sigma_index as u64,
            trial as u64,
        ],
    )
}

/// Cells of the sweep in output order; shapes the solver cannot handle
/// (`s >= n`, `r > min(s n1, n2)`) are skipped.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &n in &spec.n {
        for &s in &spec.s {
            for &r in &spec.r {
                if ProblemDims::new(n, s, r).is_err() {
                    continue;
                }
                for (sigma_index, &sigma) in spec.sigma.iter().enumerate() {
                    out.push(Cell {
                        n,
                        s,
                        r,
                        sigma,
                        sigma_index,
                    });
                }
            }
        }
    }
    out
}

fn solver_config(spec: &ExperimentSpec, seed: u64) -> SolverConfig {
    SolverConfig {
        seed: derive_seed(seed, &[stream::SOLVER]),
        ..spec.solver.clone()
    }
}

/// Generates, solves and scores one instance. Failures become unsuccessful
/// records; they never abort a sweep.
pub fn run_trial(spec: &ExperimentSpec, cell: &Cell, trial: usize) -> TrialRecord {
    let seed = trial_seed(spec.seed, cell, trial);
    let clock = Instant::now();
    let outcome = (|| -> pgd_vhl::Result<(f64, usize)> {
        let dims = ProblemDims::new(cell.n, cell.s, cell.r)?;
        let inst = Instance::generate(
            dims,
            spec.subspace,
            seed,
            spec.separation.min_sep(cell.n),
            cell.sigma,
        )?;
        let p = inst.materialize()?;
        let op = SensingOperator::new(&p.subspace, &dims)?;
        let out = pgd_solver::solve(&op, &p.measurements, &solver_config(spec, seed), None)?;
        let rel = (&out.x_hat - &p.x_true).norm() / p.x_true.norm();
        Ok((rel, out.iterations))
    })();
    let millis = clock.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((rel, iterations)) => TrialRecord {
            cell: *cell,
            trial,
            seed,
            rel_err: Some(rel),
            success: rel <= spec.threshold,
            iterations,
            millis,
            error: None,
        },
        Err(e) => TrialRecord {
            cell: *cell,
            trial,
            seed,
            rel_err: None,
            success: false,
            iterations: 0,
            millis,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every cell, trials in parallel on `pool`, and hands each finished
/// cell to `sink` in grid order.
pub fn sweep(
    spec: &ExperimentSpec,
    pool: &rayon::ThreadPool,
    mut sink: impl FnMut(&CellResult, &[TrialRecord]) -> Result<()>,
) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let mut results = Vec::new();
    for cell in cells(spec) {
        let trials: Vec<TrialRecord> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, &cell, t))
                .collect()
        });
        let result = CellResult::from_trials(cell, &trials);
        sink(&result, &trials)?;
        results.push(result);
    }
    Ok(results)
}

/// Phase-transition sweep over the `(n, s, r)` grid of `spec`.
pub fn phase_transition(
    spec: &ExperimentSpec,
    pool: &rayon::ThreadPool,
    sink: impl FnMut(&CellResult, &[TrialRecord]) -> Result<()>,
) -> Result<Vec<CellResult>> {
    sweep(spec, pool, sink)
}

/// Noise sweep; the same machinery with the noise grid as the inner axis.
pub fn noise_study(
    spec: &ExperimentSpec,
    pool: &rayon::ThreadPool,
    sink: impl FnMut(&CellResult, &[TrialRecord]) -> Result<()>,
) -> Result<Vec<CellResult>> {
    sweep(spec, pool, sink)
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub n: usize,
    pub seed: u64,
    pub trace: SolverTrace,
    pub rel_err: f64,
    pub stop: pgd_vhl::StopReason,
}

/// One traced solve per `n` (first `s`, `r` and noise level of the grid),
/// with distance and relative error to the truth recorded every iteration.
pub fn convergence_study(
    spec: &ExperimentSpec,
    pool: &rayon::ThreadPool,
) -> Result<Vec<ConvergenceRun>> {
    spec.validate()?;
    let (s, r, sigma) = (spec.s[0], spec.r[0], spec.sigma[0]);
    let runs: Vec<pgd_vhl::Result<ConvergenceRun>> = pool.install(|| {
        spec.n
            .par_iter()
            .map(|&n| {
                let cell = Cell {
                    n,
                    s,
                    r,
                    sigma,
                    sigma_index: 0,
                };
                let seed = trial_seed(spec.seed, &cell, 0);
                let dims = ProblemDims::new(n, s, r)?;
                let p = Instance::generate(
                    dims,
                    spec.subspace,
                    seed,
                    spec.separation.min_sep(n),
                    sigma,
                )?
                .materialize()?;
                let op = SensingOperator::new(&p.subspace, &dims)?;
                let truth = Truth::new(&p.x_true, &dims)?;
                let out = pgd_solver::solve(
                    &op,
                    &p.measurements,
                    &solver_config(spec, seed),
                    Some(&truth),
                )?;
                Ok(ConvergenceRun {
                    n,
                    seed,
                    rel_err: (&out.x_hat - &p.x_true).norm() / p.x_true.norm(),
                    stop: out.stop,
                    trace: out.trace,
                })
            })
            .collect()
    });
    runs.into_iter().map(|r| r.map_err(Into::into)).collect()
}

/// Wall-clock seconds of one fixed-step iteration (gradient, step and
/// objective) at the spectral initialisation, best of `repeats` batches of
/// `iters` iterations. Fixed steps keep the work per iteration constant.
pub fn iteration_cost(
    n: usize,
    s: usize,
    r: usize,
    seed: u64,
    iters: usize,
    repeats: usize,
) -> Result<f64> {
    let dims = ProblemDims::new(n, s, r)?;
    let p = Instance::generate(
        dims,
        pgd_vhl::SubspaceKind::DftRows,
        seed,
        Some(1.0 / n as f64),
        0.0,
    )?
    .materialize()?;
    let op = SensingOperator::new(&p.subspace, &dims)?;
    let mut solver = PgdVhl::new(&op, &p.measurements)?;
    let base = SolverConfig::default();
    let init = solver.spectral_init(&base)?;
    let config = SolverConfig {
        step: StepMode::Fixed {
            eta: 0.5 / init.sigma1,
        },
        ..base
    };
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let mut m = init.factors.clone();
        let mut f = solver.objective(&m)?;
        let clock = Instant::now();
        for _ in 0..iters {
            let grad = solver.gradient(&m)?;
            let next = solver.step(&m, f, &grad, &config, &init.params, init.sigma1)?;
            m = next.factors;
            f = next.objective;
        }
        best = best.min(clock.elapsed().as_secs_f64() / iters as f64);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ExperimentKind;

    fn pool() -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
    }

    #[test]
    fn easy_and_hopeless_trials() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PhaseSr);
        let easy = Cell {
            n: 64,
            s: 2,
            r: 2,
            sigma: 0.0,
            sigma_index: 0,
        };
        assert!(run_trial(&spec, &easy, 0).success);
        spec.solver.max_iters = 200;
        let hard = Cell {
            s: 12,
            r: 12,
            ..easy
        };
        assert!(!run_trial(&spec, &hard, 0).success);
    }

    #[test]
    fn same_seed_same_record() {
        let spec = ExperimentSpec::defaults(ExperimentKind::PhaseSr);
        let cell = Cell {
            n: 32,
            s: 2,
            r: 3,
            sigma: 0.0,
            sigma_index: 0,
        };
        let a = run_trial(&spec, &cell, 4);
        let b = run_trial(&spec, &cell, 4);
        assert_eq!(
            (a.rel_err, a.iterations, a.seed),
            (b.rel_err, b.iterations, b.seed)
        );
    }

    #[test]
    fn infeasible_separation_is_a_failed_trial() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PhaseSr);
        spec.n = vec![8];
        let cell = Cell {
            n: 8,
            s: 1,
            r: 5,
            sigma: 0.0,
            sigma_index: 0,
        };
        let rec = run_trial(&spec, &cell, 0);
        assert!(!rec.success);
        assert!(rec.error.is_some());
        assert_eq!(rec.rel_err, None);
    }

    #[test]
    fn cells_skip_inadmissible_shapes() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PhaseNs);
        spec.n = vec![8];
        spec.s = vec![4, 8, 9];
        let c = cells(&spec);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].n, c[0].s), (8, 4));
    }

    #[test]
    fn parallel_and_serial_sweeps_agree() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PhaseSr);
        spec.n = vec![32];
        spec.s = vec![1, 3];
        spec.r = vec![2];
        spec.trials = 4;
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let strip = |v: Vec<CellResult>| {
            v.into_iter()
                .map(|c| {
                    (
                        c.successes,
                        c.mean_rel_err.to_bits(),
                        c.mean_iterations.to_bits(),
                    )
                })
                .collect::<Vec<_>>()
        };
        let a = strip(sweep(&spec, &serial, |_, _| Ok(())).unwrap());
        let b = strip(sweep(&spec, &pool(), |_, _| Ok(())).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn median_of_even_count() {
        let cell = Cell {
            n: 8,
            s: 1,
            r: 1,
            sigma: 0.0,
            sigma_index: 0,
        };
        let rec = |e: f64| TrialRecord {
            cell,
            trial: 0,
            seed: 0,
            rel_err: Some(e),
            success: e < 0.5,
            iterations: 1,
            millis: 0.0,
            error: None,
        };
        let res = CellResult::from_trials(cell, &[rec(0.1), rec(0.4), rec(0.2), rec(0.9)]);
        assert!((res.median_rel_err - 0.3).abs() < 1e-15);
        assert_eq!(res.successes, 3);
        assert!((res.success_rate() - 0.75).abs() < 1e-15);
    }
}
