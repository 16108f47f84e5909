//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain numbers and returns a JSON string; the
//! page does its own drawing. The `*_view` functions hold the logic and are
//! ordinary Rust so they can be tested natively.

use pgd_vhl::postprocess::{self, GRID_FACTOR};
use pgd_vhl::rng::derive_seed;
use pgd_vhl::{
    pgd_solver, Instance, ProblemDims, SensingOperator, SolverConfig, SubspaceKind, Truth,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

#[derive(Debug, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub rel_err: f64,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub n: usize,
    pub taus_true: Vec<f64>,
    pub amps_true: Vec<f64>,
    pub taus_hat: Vec<f64>,
    pub amps_hat: Vec<f64>,
    pub rel_err: f64,
    pub iterations: usize,
    pub stop: String,
    pub trace: Vec<TracePoint>,
    /// MUSIC pseudospectrum on `spectrum.len()` uniform points of `[0, 1)`.
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PhaseCell {
    pub s: usize,
    pub r: usize,
    pub successes: usize,
    pub trials: usize,
}

#[derive(Debug, Serialize)]
pub struct NoisePoint {
    pub sigma: f64,
    pub mean_rel_err: f64,
}

fn dims(n: usize, s: usize, r: usize) -> Result<ProblemDims> {
    ProblemDims::new(n, s, r).map_err(|e| e.to_string())
}

fn instance(dims: ProblemDims, seed: u64, sigma: f64) -> Result<Instance> {
    Instance::generate(
        dims,
        SubspaceKind::DftRows,
        seed,
        Some(1.0 / dims.n as f64),
        sigma,
    )
    .map_err(|e| e.to_string())
}

fn config(sigma: f64) -> SolverConfig {
    if sigma > 0.0 {
        SolverConfig::noisy()
    } else {
        SolverConfig::default()
    }
}

/// Relative error of one solve, or `None` if the instance could not be built.
fn solve_error(dims: ProblemDims, seed: u64, sigma: f64) -> Option<f64> {
    let p = instance(dims, seed, sigma).ok()?.materialize().ok()?;
    let op = SensingOperator::new(&p.subspace, &dims).ok()?;
    let out = pgd_solver::solve(&op, &p.measurements, &config(sigma), None).ok()?;
    Some((&out.x_hat - &p.x_true).norm() / p.x_true.norm())
}

pub fn solve_view(n: usize, s: usize, r: usize, seed: u64, sigma: f64) -> Result<SolveView> {
    let dims = dims(n, s, r)?;
    let p = instance(dims, seed, sigma)?
        .materialize()
        .map_err(|e| e.to_string())?;
    let op = SensingOperator::new(&p.subspace, &dims).map_err(|e| e.to_string())?;
    let truth = Truth::new(&p.x_true, &dims).map_err(|e| e.to_string())?;
    let out = pgd_solver::solve(&op, &p.measurements, &config(sigma), Some(&truth))
        .map_err(|e| e.to_string())?;
    let grid = GRID_FACTOR * n;
    let rec = postprocess::recover(&out.x_hat, &p.measurements, &p.subspace, &dims, grid)
        .map_err(|e| e.to_string())?;
    let spectrum =
        postprocess::pseudospectrum(&out.x_hat, &dims, r, grid).map_err(|e| e.to_string())?;
    let mut truth_order: Vec<usize> = (0..r).collect();
    truth_order.sort_by(|&a, &b| p.sources.taus[a].total_cmp(&p.sources.taus[b]));
    Ok(SolveView {
        n,
        taus_true: truth_order.iter().map(|&k| p.sources.taus[k]).collect(),
        amps_true: truth_order
            .iter()
            .map(|&k| p.sources.amps[k].norm())
            .collect(),
        taus_hat: rec.taus_hat.clone(),
        amps_hat: rec.weights_hat.iter().map(|v| v.norm()).collect(),
        rel_err: (&out.x_hat - &p.x_true).norm() / p.x_true.norm(),
        iterations: out.iterations,
        stop: format!("{:?}", out.stop),
        trace: out
            .trace
            .records
            .iter()
            .map(|t| TracePoint {
                iteration: t.iteration,
                rel_err: t.rel_err.unwrap_or(f64::NAN),
                residual: t.residual,
            })
            .collect(),
        spectrum,
    })
}

/// Success counts on the grid `s, r in 1..=max` at length `n`.
pub fn phase_view(
    n: usize,
    s_max: usize,
    r_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<PhaseCell>> {
    if trials == 0 {
        return Err("trials must be at least 1".into());
    }
    let mut cells = Vec::new();
    for s in 1..=s_max {
        for r in 1..=r_max {
            let Ok(d) = ProblemDims::new(n, s, r) else {
                continue;
            };
            let successes = (0..trials)
                .filter(|&t| {
                    let seed = derive_seed(seed, &[n as u64, s as u64, r as u64, t as u64]);
                    solve_error(d, seed, 0.0).is_some_and(|e| e <= 1e-3)
                })
                .count();
            cells.push(PhaseCell {
                s,
                r,
                successes,
                trials,
            });
        }
    }
    Ok(cells)
}

/// Mean relative error at log-spaced noise levels from `1e-3` to `1`.
pub fn noise_view(
    n: usize,
    s: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<NoisePoint>> {
    let d = dims(n, s, r)?;
    if trials == 0 {
        return Err("trials must be at least 1".into());
    }
    Ok((0..7)
        .map(|i| {
            let sigma = 10f64.powf(-3.0 + 0.5 * i as f64);
            let total: f64 = (0..trials)
                .map(|t| {
                    solve_error(d, derive_seed(seed, &[i as u64, t as u64]), sigma).unwrap_or(1.0)
                })
                .sum();
            NoisePoint {
                sigma,
                mean_rel_err: total / trials as f64,
            }
        })
        .collect())
}

fn to_js<T: Serialize>(v: Result<T>) -> std::result::Result<String, JsValue> {
    v.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(
    n: usize,
    s: usize,
    r: usize,
    seed: u64,
    sigma: f64,
) -> std::result::Result<String, JsValue> {
    to_js(solve_view(n, s, r, seed, sigma))
}

#[wasm_bindgen]
pub fn phase(
    n: usize,
    s_max: usize,
    r_max: usize,
    trials: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(phase_view(n, s_max, r_max, trials, seed))
}

#[wasm_bindgen]
pub fn noise(
    n: usize,
    s: usize,
    r: usize,
    trials: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(noise_view(n, s, r, trials, seed))
}
