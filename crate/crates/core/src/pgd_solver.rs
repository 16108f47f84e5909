//! Projected gradient descent on the Burer-Monteiro factors of the lifted
//! matrix.
//!
//! The decision variable is `M = [L; R]` with `L` of size `(s*n1) x r` and
//! `R` of size `n2 x r`. The objective is
//!
//! ```text
//! f(M) = 1/2 ||D y - A G*(L R^H)||^2
//!      + 1/2 ||(I - G G*)(L R^H)||_F^2
//!      + 1/16 ||L^H L - R^H R||_F^2
//! ```
//!
//! and every evaluation goes through the FFT paths of
//! [`HankelWorkspace`]; `L R^H` is never formed. The middle term uses
//! `||(I - G G*) Z||^2 = ||Z||^2 - ||G* Z||^2` with `||L R^H||^2 = tr(L^H L R^H R)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::hankel_ops::{self, HankelWorkspace};
use crate::linalg::{self, fro_norm_sq, SvdMethod};
use crate::measurement_ops::SensingOperator;
use crate::rng::seeded;
use crate::signal_model::{Measurements, ProblemDims};
use crate::{CMat, CVec, C64};

/// `M = [L; R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub l: CMat,
    pub r: CMat,
}

impl FactorPair {
    pub fn new(l: CMat, r: CMat) -> Result<Self> {
        if l.ncols() != r.ncols() {
            return Err(Error::DimensionMismatch {
                op: "FactorPair::new",
                expected: format!("{} columns", l.ncols()),
                got: r.ncols().to_string(),
            });
        }
        Ok(FactorPair { l, r })
    }

    pub fn zeros(dims: &ProblemDims) -> Self {
        FactorPair {
            l: CMat::zeros(dims.lifted_rows(), dims.r),
            r: CMat::zeros(dims.n2, dims.r),
        }
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn check(&self, dims: &ProblemDims, op: &'static str) -> Result<()> {
        check_shape(op, self.l.shape(), (dims.lifted_rows(), dims.r))?;
        check_shape(op, self.r.shape(), (dims.n2, dims.r))
    }

    /// `[L; R]` as one matrix.
    pub fn stacked(&self) -> CMat {
        let (m1, m2, k) = (self.l.nrows(), self.r.nrows(), self.rank());
        let mut out = CMat::zeros(m1 + m2, k);
        out.view_mut((0, 0), (m1, k)).copy_from(&self.l);
        out.view_mut((m1, 0), (m2, k)).copy_from(&self.r);
        out
    }

    pub fn from_stacked(m: &CMat, lifted_rows: usize) -> Self {
        let k = m.ncols();
        FactorPair {
            l: m.view((0, 0), (lifted_rows, k)).into_owned(),
            r: m.view((lifted_rows, 0), (m.nrows() - lifted_rows, k))
                .into_owned(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        fro_norm_sq(&self.l) + fro_norm_sq(&self.r)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &FactorPair) -> FactorPair {
        let a = C64::from(alpha);
        FactorPair {
            l: &self.l + &other.l * a,
            r: &self.r + &other.r * a,
        }
    }

    pub fn scaled(&self, alpha: C64) -> FactorPair {
        FactorPair {
            l: &self.l * alpha,
            r: &self.r * alpha,
        }
    }

    /// `Re <self, other>` summed over both factors.
    pub fn real_inner(&self, other: &FactorPair) -> f64 {
        (linalg::inner(&self.l, &other.l) + linalg::inner(&self.r, &other.r)).re
    }
}

/// Radius `sqrt(mu r sigma / n)` of the per-block caps defining the
/// constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionParams {
    pub mu: f64,
    pub sigma: f64,
    pub bound: f64,
}

impl ProjectionParams {
    pub fn new(mu: f64, sigma: f64, dims: &ProblemDims) -> Result<Self> {
        if !(mu > 0.0) || !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "projection needs mu > 0 and sigma > 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        Ok(ProjectionParams {
            mu,
            sigma,
            bound: (mu * dims.r as f64 * sigma / dims.n as f64).sqrt(),
        })
    }

    /// Parameters with an explicit cap, for callers that already know it.
    pub fn with_bound(bound: f64) -> Self {
        ProjectionParams {
            mu: f64::NAN,
            sigma: f64::NAN,
            bound,
        }
    }
}

/// Blockwise projection onto the constraint set: every `s`-row block of `L`
/// and every row of `R` whose norm exceeds the cap is rescaled onto it.
pub fn project(m: &FactorPair, params: &ProjectionParams, s: usize) -> FactorPair {
    let bound = params.bound;
    // a rescaled block may land a few ulps above the cap; leaving it alone
    // keeps the projection idempotent
    let trigger = bound * (1.0 + 4.0 * f64::EPSILON);
    let mut out = m.clone();
    let k = out.rank();
    for j in 0..out.l.nrows() / s {
        let mut block = out.l.view_mut((j * s, 0), (s, k));
        let norm = block.norm();
        if norm > trigger {
            block *= C64::from(bound / norm);
        }
    }
    for mut row in out.r.row_iter_mut() {
        let norm = row.norm();
        if norm > trigger {
            row *= C64::from(bound / norm);
        }
    }
    out
}

/// `min_Q ||M - M_ref Q||_F` over unitary `Q`, via orthogonal Procrustes.
pub fn distance(m: &FactorPair, m_ref: &FactorPair) -> Result<f64> {
    check_shape("distance", m.l.shape(), m_ref.l.shape())?;
    check_shape("distance", m.r.shape(), m_ref.r.shape())?;
    let a = m.stacked();
    let b = m_ref.stacked();
    let q = linalg::procrustes_unitary(&a, &b);
    Ok((a - b * q).norm())
}

/// Balanced factors `[U S^1/2; V S^1/2]` of the rank-`r` SVD of `H(X)`.
pub fn balanced_factors(x: &CMat, dims: &ProblemDims) -> Result<FactorPair> {
    let z = hankel_ops::hankel_apply(x, dims)?;
    let svd = linalg::dense_truncated_svd(&z, dims.r);
    Ok(split_factors(&svd))
}

fn split_factors(svd: &linalg::TruncatedSvd) -> FactorPair {
    let root = CMat::from_diagonal(&svd.sigma.map(|v| C64::from(v.sqrt())));
    FactorPair {
        l: &svd.u * &root,
        r: &svd.v * &root,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StepMode {
    Fixed {
        eta: f64,
    },
    /// Largest `eta = initial * shrink^k` with
    /// `f(P(M - eta g)) <= f(M) - sufficient_decrease * eta * ||g||^2`.
    /// `initial = None` means `1 / (2 sigma_1)` of the spectral initialisation.
    Backtracking {
        initial: Option<f64>,
        shrink: f64,
        sufficient_decrease: f64,
        max_backtracks: usize,
    },
}

impl Default for StepMode {
    fn default() -> Self {
        StepMode::Backtracking {
            initial: None,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// `sigma = sigma_1` of the spectral initialisation.
    #[default]
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `||y - A(X_t)|| <= tol_residual`.
    pub tol_residual: Option<f64>,
    /// Stop once `||X_{t+1} - X_t||_F / ||X_t||_F <= tol_stagnation`.
    pub tol_stagnation: Option<f64>,
    pub step: StepMode,
    pub mu: f64,
    pub sigma: SigmaMode,
    pub svd: SvdMethod,
    /// Seed of the sketch used by the randomized SVD.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1000,
            tol_residual: Some(1e-5),
            tol_stagnation: None,
            step: StepMode::default(),
            mu: 4.0,
            sigma: SigmaMode::Auto,
            svd: SvdMethod::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Defaults for noisy data: stop on relative iterate change.
    pub fn noisy() -> Self {
        SolverConfig {
            tol_residual: None,
            tol_stagnation: Some(1e-7),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, tol) in [
            ("tol_residual", self.tol_residual),
            ("tol_stagnation", self.tol_stagnation),
        ] {
            if let Some(t) = tol {
                if !(t > 0.0) {
                    return bad(format!("{name} must be positive, got {t}"));
                }
            }
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if let SigmaMode::Explicit(s) = self.sigma {
            if !(s > 0.0) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        match self.step {
            StepMode::Fixed { eta } if !(eta > 0.0) => {
                bad(format!("step size must be positive, got {eta}"))
            }
            StepMode::Backtracking {
                initial,
                shrink,
                sufficient_decrease,
                ..
            } => {
                if !(shrink > 0.0 && shrink < 1.0) {
                    return bad(format!("shrink factor must lie in (0, 1), got {shrink}"));
                }
                if !(sufficient_decrease > 0.0) {
                    return bad(format!(
                        "sufficient decrease constant must be positive, got {sufficient_decrease}"
                    ));
                }
                match initial {
                    Some(e) if !(e > 0.0) => bad(format!("initial step must be positive, got {e}")),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

/// One row of the solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `||y - A(X_t)||_2`.
    pub residual: f64,
    pub step: f64,
    pub dist: Option<f64>,
    pub rel_err: Option<f64>,
    pub millis: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
}

impl SolverTrace {
    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,f,residual,step,dist,rel_err,millis\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{},{},{:.3}\n",
                r.iteration,
                r.objective,
                r.residual,
                r.step,
                opt(r.dist),
                opt(r.rel_err),
                r.millis
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ResidualTolerance,
    Stagnation,
    BacktrackingExhausted,
    MaxIterations,
}

/// Ground truth used only for diagnostics in the trace.
#[derive(Debug, Clone)]
pub struct Truth {
    pub x: CMat,
    pub factors: FactorPair,
}

impl Truth {
    pub fn new(x: &CMat, dims: &ProblemDims) -> Result<Self> {
        Ok(Truth {
            x: x.clone(),
            factors: balanced_factors(x, dims)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub factors: FactorPair,
    /// `sigma_1` of the rank-`r` truncation.
    pub sigma1: f64,
    pub params: ProjectionParams,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub factors: FactorPair,
    pub eta: f64,
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub factors: FactorPair,
    pub x_hat: CMat,
    pub trace: SolverTrace,
    pub stop: StopReason,
    pub iterations: usize,
    pub sigma1: f64,
    pub params: ProjectionParams,
}

/// Relative size, in units of `||L R^H||_F^2`, below which the off-Hankel
/// energy cannot be told apart from rounding error.
const ROUNDOFF_FLOOR: f64 = 16.0 * f64::EPSILON;

/// Values shared by the objective and the gradient at one point.
struct Eval {
    objective: f64,
    gstar: CMat,
    residual: CVec,
    lhl: CMat,
    rhr: CMat,
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub struct Stopwatch(std::time::Instant);
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(std::time::Instant::now())
        }
        pub fn millis(&self) -> f64 {
            self.0.elapsed().as_secs_f64() * 1e3
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Stopwatch;
    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }
        pub fn millis(&self) -> f64 {
            0.0
        }
    }
}

/// The solver bound to one sensing operator and one set of measurements.
/// Owns its FFT workspace; not shared across threads.
pub struct PgdVhl<'a> {
    op: &'a SensingOperator,
    m: &'a Measurements,
    ws: HankelWorkspace,
    dims: ProblemDims,
}

impl<'a> PgdVhl<'a> {
    pub fn new(op: &'a SensingOperator, m: &'a Measurements) -> Result<Self> {
        let dims = *op.dims();
        dims.validate()?;
        crate::error::check_len("PgdVhl::new", m.y.len(), dims.n)?;
        Ok(PgdVhl {
            op,
            m,
            ws: HankelWorkspace::new(&dims),
            dims,
        })
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    fn evaluate(&mut self, mm: &FactorPair) -> Result<Eval> {
        mm.check(&self.dims, "objective")?;
        let gstar = self.ws.gstar_lowrank(&mm.l, &mm.r)?;
        let residual = self.op.residual_from_gstar(&gstar, self.m)?;
        let lhl = mm.l.adjoint() * &mm.l;
        let rhr = mm.r.adjoint() * &mm.r;
        // ||L R^H||_F^2 = tr(L^H L R^H R)
        let lifted_sq = lhl.component_mul(&rhr.transpose()).sum().re;
        // differences below the round-off floor of the subtraction are noise
        let off_hankel = lifted_sq - fro_norm_sq(&gstar);
        let off_hankel = if off_hankel <= ROUNDOFF_FLOOR * lifted_sq {
            0.0
        } else {
            off_hankel
        };
        let balance = fro_norm_sq(&(&lhl - &rhr));
        let objective =
            0.5 * linalg::vec_norm_sq(residual.as_slice()) + 0.5 * off_hankel + balance / 16.0;
        Ok(Eval {
            objective,
            gstar,
            residual,
            lhl,
            rhr,
        })
    }

    pub fn objective(&mut self, mm: &FactorPair) -> Result<f64> {
        Ok(self.evaluate(mm)?.objective)
    }

    fn gradient_at(&mut self, mm: &FactorPair, ev: &Eval) -> Result<FactorPair> {
        let w = self.ws.weights().clone();
        // E + K = L R^H + H(D^-1 (A*(res) - G*(L R^H)))
        let correction = w.unscale_cols(&(self.op.adjoint(&ev.residual)? - &ev.gstar));
        let quarter = C64::from(0.25);
        let diff = &ev.lhl - &ev.rhr;
        let grad_l =
            &mm.l * &ev.rhr + self.ws.h_times_r(&correction, &mm.r)? + &mm.l * &diff * quarter;
        let grad_r = &mm.r * &ev.lhl + self.ws.h_adjoint_times_l(&correction, &mm.l)?
            - &mm.r * &diff * quarter;
        Ok(FactorPair {
            l: grad_l,
            r: grad_r,
        })
    }

    /// The Wirtinger gradient `[grad_L f; grad_R f]`. With this scaling the
    /// real directional derivative is `Re <grad f, Delta>`, i.e. twice the
    /// real part against the conjugate cogradient `grad f / 2`.
    pub fn gradient(&mut self, mm: &FactorPair) -> Result<FactorPair> {
        let ev = self.evaluate(mm)?;
        self.gradient_at(mm, &ev)
    }

    /// `X = D^-1 G*(L R^H)`.
    pub fn recover_x(&mut self, mm: &FactorPair) -> Result<CMat> {
        mm.check(&self.dims, "recover_x")?;
        let gstar = self.ws.gstar_lowrank(&mm.l, &mm.r)?;
        Ok(self.ws.weights().unscale_cols(&gstar))
    }

    /// Rank-`r` truncation of `H(A*(y))`, split into balanced factors and
    /// projected. `H A*(y)` equals `G A*(D y)` because `A*` commutes with `D`.
    pub fn spectral_init(&mut self, config: &SolverConfig) -> Result<SpectralInit> {
        if self.m.y.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(Error::DegenerateMeasurements);
        }
        let back = self.op.adjoint(&self.m.y)?;
        let z = hankel_ops::hankel_apply(&back, &self.dims)?;
        let mut rng = seeded(config.seed);
        let svd = linalg::truncated_svd(&z, self.dims.r, config.svd, &mut rng);
        let sigma1 = svd.sigma[0];
        if !(sigma1 > 0.0) {
            return Err(Error::DegenerateMeasurements);
        }
        let sigma = match config.sigma {
            SigmaMode::Auto => sigma1,
            SigmaMode::Explicit(v) => v,
        };
        let params = ProjectionParams::new(config.mu, sigma, &self.dims)?;
        let factors = project(&split_factors(&svd), &params, self.dims.s);
        Ok(SpectralInit {
            factors,
            sigma1,
            params,
        })
    }

    fn initial_step(config: &SolverConfig, sigma1: f64) -> f64 {
        match config.step {
            StepMode::Fixed { eta } => eta,
            StepMode::Backtracking { initial, .. } => initial.unwrap_or(0.5 / sigma1),
        }
    }

    /// One projected gradient step from `mm` (objective `f_cur`, gradient `grad`).
    pub fn step(
        &mut self,
        mm: &FactorPair,
        f_cur: f64,
        grad: &FactorPair,
        config: &SolverConfig,
        params: &ProjectionParams,
        sigma1: f64,
    ) -> Result<StepResult> {
        let s = self.dims.s;
        let eta0 = Self::initial_step(config, sigma1);
        match config.step {
            StepMode::Fixed { eta } => {
                let next = project(&mm.add_scaled(-eta, grad), params, s);
                let objective = self.objective(&next)?;
                Ok(StepResult {
                    factors: next,
                    eta,
                    objective,
                    accepted: true,
                })
            }
            StepMode::Backtracking {
                shrink,
                sufficient_decrease,
                max_backtracks,
                ..
            } => {
                let gnorm = grad.norm_sq();
                let mut eta = eta0;
                let mut last = None;
                for _ in 0..=max_backtracks {
                    let next = project(&mm.add_scaled(-eta, grad), params, s);
                    let objective = self.objective(&next)?;
                    if objective <= f_cur - sufficient_decrease * eta * gnorm {
                        return Ok(StepResult {
                            factors: next,
                            eta,
                            objective,
                            accepted: true,
                        });
                    }
                    last = Some((next, eta, objective));
                    eta *= shrink;
                }
                let (factors, eta, objective) = last.expect("at least one trial step");
                Ok(StepResult {
                    factors,
                    eta,
                    objective,
                    accepted: false,
                })
            }
        }
    }

    fn record(
        &self,
        iteration: usize,
        ev: &Eval,
        mm: &FactorPair,
        step: f64,
        truth: Option<&Truth>,
        millis: f64,
    ) -> Result<IterRecord> {
        let w = self.ws.weights();
        let residual = w.unscale_vec(&ev.residual).norm();
        let (dist, rel_err) = match truth {
            Some(t) => {
                let x = w.unscale_cols(&ev.gstar);
                (
                    Some(distance(mm, &t.factors)?),
                    Some((x - &t.x).norm() / t.x.norm()),
                )
            }
            None => (None, None),
        };
        Ok(IterRecord {
            iteration,
            objective: ev.objective,
            residual,
            step,
            dist,
            rel_err,
            millis,
        })
    }

    /// Spectral initialisation followed by projected gradient steps until a
    /// stopping rule fires. Iteration 0 of the trace is the initial point.
    pub fn solve(&mut self, config: &SolverConfig, truth: Option<&Truth>) -> Result<SolveOutcome> {
        config.validate()?;
        let clock = clock::Stopwatch::start();
        let init = self.spectral_init(config)?;
        let mut current = init.factors;
        let mut ev = self.evaluate(&current)?;
        let mut trace = SolverTrace::default();
        trace
            .records
            .push(self.record(0, &ev, &current, 0.0, truth, clock.millis())?);

        let mut stop = StopReason::MaxIterations;
        let mut iterations = 0;
        let mut x_prev = self.ws.weights().unscale_cols(&ev.gstar);
        let residual_now =
            |ev: &Eval, ws: &HankelWorkspace| ws.weights().unscale_vec(&ev.residual).norm();

        if config
            .tol_residual
            .is_some_and(|tol| residual_now(&ev, &self.ws) <= tol)
        {
            stop = StopReason::ResidualTolerance;
        } else {
            for t in 1..=config.max_iters {
                let tick = clock::Stopwatch::start();
                let grad = self.gradient_at(&current, &ev)?;
                let res = self.step(
                    &current,
                    ev.objective,
                    &grad,
                    config,
                    &init.params,
                    init.sigma1,
                )?;
                if !res.accepted && res.objective > ev.objective {
                    stop = StopReason::BacktrackingExhausted;
                    break;
                }
                current = res.factors;
                ev = self.evaluate(&current)?;
                iterations = t;
                trace
                    .records
                    .push(self.record(t, &ev, &current, res.eta, truth, tick.millis())?);
                if !res.accepted {
                    stop = StopReason::BacktrackingExhausted;
                    break;
                }
                let x_now = self.ws.weights().unscale_cols(&ev.gstar);
                if config
                    .tol_residual
                    .is_some_and(|tol| residual_now(&ev, &self.ws) <= tol)
                {
                    stop = StopReason::ResidualTolerance;
                    break;
                }
                if let Some(tol) = config.tol_stagnation {
                    let denom = x_prev.norm();
                    if denom > 0.0 && (&x_now - &x_prev).norm() / denom <= tol {
                        stop = StopReason::Stagnation;
                        break;
                    }
                }
                x_prev = x_now;
            }
        }
        let x_hat = self.ws.weights().unscale_cols(&ev.gstar);
        Ok(SolveOutcome {
            factors: current,
            x_hat,
            trace,
            stop,
            iterations,
            sigma1: init.sigma1,
            params: init.params,
        })
    }
}

/// Convenience wrapper: build the solver for `op`/`m` and run it.
pub fn solve(
    op: &SensingOperator,
    m: &Measurements,
    config: &SolverConfig,
    truth: Option<&Truth>,
) -> Result<SolveOutcome> {
    PgdVhl::new(op, m)?.solve(config, truth)
}
