//! Point-source instances, subspaces, target matrices and measurements.
//!
//! The measurement model is `y[j] = b_j^H x_j` where `x_j` is column `j` of
//! the target `X = sum_k d_k h_k a_{tau_k}^T` and `b_j^H` is row `j` of the
//! known subspace matrix `B`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::hankel_ops::{self, WeightVector};
use crate::linalg::{complex_gaussian, dense_truncated_svd};
use crate::measurement_ops::apply_rows;
use crate::rng::{derive_seed, seeded, stream};
use crate::{CMat, CVec, C64};

use std::f64::consts::PI;

/// Rejection-sampling budget for separated source locations.
pub const SEPARATION_BUDGET: usize = 10_000;

/// Sizes governing every operator shape: `n` samples, subspace dimension
/// `s`, model order `r`, and the Hankel split `n1 + n2 = n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub s: usize,
    pub r: usize,
    pub n1: usize,
    pub n2: usize,
}

impl ProblemDims {
    /// Uses the balanced split `n1 = ceil((n+1)/2)`.
    pub fn new(n: usize, s: usize, r: usize) -> Result<Self> {
        let n1 = (n + 2) / 2;
        Self::with_split(n, s, r, n1)
    }

    pub fn with_split(n: usize, s: usize, r: usize, n1: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDims(format!("n = {n} must be at least 2")));
        }
        if s == 0 || s >= n {
            return Err(Error::InvalidDims(format!(
                "need 1 <= s < n, got s = {s}, n = {n}"
            )));
        }
        if n1 == 0 || n1 > n {
            return Err(Error::InvalidDims(format!(
                "need 1 <= n1 <= n, got n1 = {n1}"
            )));
        }
        let n2 = n + 1 - n1;
        let dims = ProblemDims { n, s, r, n1, n2 };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let ProblemDims { n, s, r, n1, n2 } = *self;
        if n1 + n2 != n + 1 {
            return Err(Error::InvalidDims(format!(
                "n1 + n2 = {} must equal n + 1 = {}",
                n1 + n2,
                n + 1
            )));
        }
        if s == 0 || s >= n {
            return Err(Error::InvalidDims(format!("need 1 <= s < n, got s = {s}")));
        }
        if r == 0 || r > (s * n1).min(n2) {
            return Err(Error::InvalidDims(format!(
                "need 1 <= r <= min(s*n1, n2) = {}, got r = {r}",
                (s * n1).min(n2)
            )));
        }
        Ok(())
    }

    /// Rows of the lifted matrix, `s * n1`.
    pub fn lifted_rows(&self) -> usize {
        self.s * self.n1
    }
}

/// Wrap-around distance on the unit circle.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest pairwise wrap-around distance (infinite for fewer than two points).
pub fn min_separation(taus: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in taus.iter().enumerate() {
        for &b in &taus[i + 1..] {
            best = best.min(wrap_distance(a, b));
        }
    }
    best
}

/// Ground-truth spikes: locations `taus`, amplitudes `amps` and unit-norm
/// subspace coefficients (column `k` of `coeffs` is `h_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct PointSources {
    pub taus: Vec<f64>,
    pub amps: Vec<C64>,
    pub coeffs: CMat,
}

impl PointSources {
    pub fn r(&self) -> usize {
        self.taus.len()
    }
}

pub fn sample_point_sources<R: Rng + ?Sized>(
    dims: &ProblemDims,
    rng: &mut R,
    min_sep: Option<f64>,
) -> Result<PointSources> {
    let r = dims.r;
    if r == 0 {
        return Err(Error::InvalidDims("r must be positive".into()));
    }
    let taus = match min_sep {
        None => (0..r).map(|_| rng.random::<f64>()).collect(),
        Some(sep) => {
            if !(sep >= 0.0) || r as f64 * sep >= 1.0 {
                return Err(Error::SeparationInfeasible {
                    r,
                    min_sep: sep,
                    attempts: 0,
                });
            }
            let mut found = None;
            for _ in 0..SEPARATION_BUDGET {
                let cand: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
                if min_separation(&cand) >= sep {
                    found = Some(cand);
                    break;
                }
            }
            found.ok_or(Error::SeparationInfeasible {
                r,
                min_sep: sep,
                attempts: SEPARATION_BUDGET,
            })?
        }
    };
    let amps = (0..r)
        .map(|_| {
            let c: f64 = rng.random();
            let phi = 2.0 * PI * rng.random::<f64>();
            C64::from_polar(1.0 + 10f64.powf(c), -phi)
        })
        .collect();
    let mut coeffs = CMat::from_fn(dims.s, r, |_, _| complex_gaussian(rng));
    for mut col in coeffs.column_iter_mut() {
        let norm = col.norm();
        col /= C64::from(norm);
    }
    Ok(PointSources { taus, amps, coeffs })
}

/// `a_tau = [1, e^{-2 pi i tau}, ..., e^{-2 pi i tau (n-1)}]^T`.
pub fn steering_vector(tau: f64, n: usize) -> CVec {
    CVec::from_fn(n, |j, _| {
        // reduce the phase before the trig call so large j stay accurate
        let phase = (tau * j as f64).rem_euclid(1.0);
        C64::from_polar(1.0, -2.0 * PI * phase)
    })
}

/// `X = sum_k d_k h_k a_{tau_k}^T`, an `s x n` matrix.
pub fn build_target_matrix(sources: &PointSources, dims: &ProblemDims) -> Result<CMat> {
    check_shape(
        "build_target_matrix",
        sources.coeffs.shape(),
        (dims.s, sources.taus.len()),
    )?;
    if sources.amps.len() != sources.taus.len() {
        return Err(Error::DimensionMismatch {
            op: "build_target_matrix",
            expected: format!("{} amplitudes", sources.taus.len()),
            got: sources.amps.len().to_string(),
        });
    }
    let mut x = CMat::zeros(dims.s, dims.n);
    for k in 0..sources.taus.len() {
        let a = steering_vector(sources.taus[k], dims.n);
        let h = sources.coeffs.column(k) * sources.amps[k];
        x += h * a.transpose();
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    DftRows,
    Rademacher,
    ComplexGaussian,
}

impl std::str::FromStr for SubspaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dft-rows" | "dft" => Ok(SubspaceKind::DftRows),
            "rademacher" => Ok(SubspaceKind::Rademacher),
            "complex-gaussian" | "gaussian" => Ok(SubspaceKind::ComplexGaussian),
            other => Err(Error::InvalidConfig(format!(
                "unknown subspace kind '{other}'"
            ))),
        }
    }
}

/// The known `n x s` matrix `B`. Row `j` of `B` is `b_j^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    pub b: CMat,
    pub kind: SubspaceKind,
    pub mu0: f64,
}

impl Subspace {
    pub fn from_matrix(b: CMat, kind: SubspaceKind) -> Self {
        let mu0 = b.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        Subspace { b, kind, mu0 }
    }

    /// `b_j` as a column vector (the conjugate of row `j` of `B`).
    pub fn b_vec(&self, j: usize) -> CVec {
        self.b.row(j).adjoint()
    }
}

pub fn sample_subspace<R: Rng + ?Sized>(
    dims: &ProblemDims,
    kind: SubspaceKind,
    rng: &mut R,
) -> Subspace {
    let (n, s) = (dims.n, dims.s);
    let b = match kind {
        SubspaceKind::DftRows => {
            // b_j is row m_j of the n-point DFT matrix restricted to its first
            // s columns, with m a random permutation of 0..n. Entries have unit
            // modulus and the rows are exactly isotropic over j.
            let rows = index::sample(rng, n, n).into_vec();
            CMat::from_fn(n, s, |j, l| {
                let phase = ((rows[j] * l) % n) as f64 / n as f64;
                C64::from_polar(1.0, 2.0 * PI * phase)
            })
        }
        SubspaceKind::Rademacher => CMat::from_fn(n, s, |_, _| {
            if rng.random::<bool>() {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        }),
        SubspaceKind::ComplexGaussian => CMat::from_fn(n, s, |_, _| complex_gaussian(rng)),
    };
    let mut sub = Subspace::from_matrix(b, kind);
    if kind != SubspaceKind::ComplexGaussian {
        sub.mu0 = 1.0;
    }
    sub
}

/// Clean or noisy samples `y` together with the weighted copy `D y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub y: CVec,
    pub weighted: CVec,
    pub noise_level: f64,
}

impl Measurements {
    pub fn new(y: CVec, weights: &WeightVector, noise_level: f64) -> Self {
        let weighted = weights.scale_vec(&y);
        Measurements {
            y,
            weighted,
            noise_level,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Same samples scaled by a complex factor.
    pub fn scaled(&self, alpha: C64) -> Self {
        Measurements {
            y: &self.y * alpha,
            weighted: &self.weighted * alpha,
            noise_level: self.noise_level,
        }
    }
}

pub fn measure(x: &CMat, subspace: &Subspace, dims: &ProblemDims) -> Result<Measurements> {
    check_shape("measure", x.shape(), (dims.s, dims.n))?;
    check_shape("measure", subspace.b.shape(), (dims.n, dims.s))?;
    let bt = subspace.b.transpose();
    let y = apply_rows(&bt, x);
    Ok(Measurements::new(y, &hankel_ops::weights(dims), 0.0))
}

/// Adds `e = sigma_e ||y|| w / ||w||` with `w` standard complex Gaussian.
pub fn add_noise<R: Rng + ?Sized>(
    m: &Measurements,
    sigma_e: f64,
    weights: &WeightVector,
    rng: &mut R,
) -> Result<Measurements> {
    if !(sigma_e >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise level must be >= 0, got {sigma_e}"
        )));
    }
    if sigma_e == 0.0 {
        return Ok(m.clone());
    }
    let w = CVec::from_fn(m.y.len(), |_, _| complex_gaussian(rng));
    let scale = sigma_e * m.y.norm() / w.norm();
    let y = &m.y + w * C64::from(scale);
    Ok(Measurements::new(y, weights, sigma_e))
}

/// `SNR(dB) = -20 log10(sigma_e)`.
pub fn snr_db(sigma_e: f64) -> f64 {
    -20.0 * sigma_e.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incoherence {
    pub mu1: f64,
    pub numerical_rank: usize,
    pub rank_deficient: bool,
}

/// Incoherence of `H(X)` from its rank-`r` singular vectors.
pub fn incoherence_mu1(x: &CMat, dims: &ProblemDims, r: usize) -> Result<Incoherence> {
    let z = hankel_ops::hankel_apply(x, dims)?;
    let svd = dense_truncated_svd(&z, dims.lifted_rows().min(dims.n2));
    let top = svd.sigma.get(0).copied().unwrap_or(0.0);
    let numerical_rank = svd
        .sigma
        .iter()
        .filter(|&&v| v > 1e-10 * top && v > 0.0)
        .count();
    let k = r.min(svd.sigma.len());
    let s = dims.s;
    let u_max = (0..dims.n1)
        .map(|j| svd.u.view((j * s, 0), (s, k)).norm_squared())
        .fold(0.0, f64::max);
    let v_max = (0..dims.n2)
        .map(|row| svd.v.view((row, 0), (1, k)).norm_squared())
        .fold(0.0, f64::max);
    Ok(Incoherence {
        mu1: dims.n as f64 / r as f64 * u_max.max(v_max),
        numerical_rank,
        rank_deficient: numerical_rank < r,
    })
}

/// Serializable description of one problem instance. Everything random that
/// is not stored explicitly (subspace, noise) is regenerated from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub dims: ProblemDims,
    pub kind: SubspaceKind,
    pub seed: u64,
    pub taus: Vec<f64>,
    /// `[re, im]` pairs.
    pub amps: Vec<[f64; 2]>,
    /// Row-major `s x r`, `[re, im]` pairs.
    pub coeffs: Vec<[f64; 2]>,
    pub noise_level: f64,
}

/// A fully materialised instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dims: ProblemDims,
    pub sources: PointSources,
    pub subspace: Subspace,
    pub x_true: CMat,
    pub clean: Measurements,
    pub measurements: Measurements,
}

impl Instance {
    pub fn generate(
        dims: ProblemDims,
        kind: SubspaceKind,
        seed: u64,
        min_sep: Option<f64>,
        noise_level: f64,
    ) -> Result<Self> {
        dims.validate()?;
        let mut rng = seeded(derive_seed(seed, &[stream::SOURCES]));
        let sources = sample_point_sources(&dims, &mut rng, min_sep)?;
        Ok(Self::from_sources(dims, kind, seed, &sources, noise_level))
    }

    pub fn from_sources(
        dims: ProblemDims,
        kind: SubspaceKind,
        seed: u64,
        sources: &PointSources,
        noise_level: f64,
    ) -> Self {
        let coeffs = (0..sources.coeffs.nrows())
            .flat_map(|i| (0..sources.coeffs.ncols()).map(move |k| (i, k)))
            .map(|(i, k)| {
                let z = sources.coeffs[(i, k)];
                [z.re, z.im]
            })
            .collect();
        Instance {
            dims,
            kind,
            seed,
            taus: sources.taus.clone(),
            amps: sources.amps.iter().map(|z| [z.re, z.im]).collect(),
            coeffs,
            noise_level,
        }
    }

    pub fn sources(&self) -> Result<PointSources> {
        let r = self.taus.len();
        let s = self.dims.s;
        if self.amps.len() != r || self.coeffs.len() != s * r {
            return Err(Error::Instance(format!(
                "expected {r} amplitudes and {} coefficients, got {} and {}",
                s * r,
                self.amps.len(),
                self.coeffs.len()
            )));
        }
        if let Some(t) = self.taus.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::Instance(format!("location {t} outside [0, 1)")));
        }
        Ok(PointSources {
            taus: self.taus.clone(),
            amps: self.amps.iter().map(|p| C64::new(p[0], p[1])).collect(),
            coeffs: CMat::from_fn(s, r, |i, k| {
                let p = self.coeffs[i * r + k];
                C64::new(p[0], p[1])
            }),
        })
    }

    pub fn materialize(&self) -> Result<Problem> {
        self.dims.validate()?;
        if self.taus.len() != self.dims.r {
            return Err(Error::Instance(format!(
                "dims.r = {} but {} locations given",
                self.dims.r,
                self.taus.len()
            )));
        }
        let sources = self.sources()?;
        let x_true = build_target_matrix(&sources, &self.dims)?;
        let mut rng = seeded(derive_seed(self.seed, &[stream::SUBSPACE]));
        let subspace = sample_subspace(&self.dims, self.kind, &mut rng);
        let clean = measure(&x_true, &subspace, &self.dims)?;
        let weights = hankel_ops::weights(&self.dims);
        let mut rng = seeded(derive_seed(self.seed, &[stream::NOISE]));
        let measurements = add_noise(&clean, self.noise_level, &weights, &mut rng)?;
        Ok(Problem {
            dims: self.dims,
            sources,
            subspace,
            x_true,
            clean,
            measurements,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Instance(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn dims(n: usize, s: usize, r: usize) -> ProblemDims {
        ProblemDims::new(n, s, r).unwrap()
    }

    #[test]
    fn default_split() {
        let d = dims(64, 4, 4);
        assert_eq!((d.n1, d.n2), (33, 32));
        let d = dims(5, 1, 1);
        assert_eq!((d.n1, d.n2), (3, 3));
        assert!(ProblemDims::new(8, 8, 1).is_err());
        assert!(ProblemDims::new(8, 2, 0).is_err());
        assert!(ProblemDims::new(8, 1, 5).is_err());
    }

    #[test]
    fn single_source_amplitude_range() {
        for seed in 0..50 {
            let ps = sample_point_sources(&dims(16, 3, 1), &mut seeded(seed), None).unwrap();
            let a = ps.amps[0].norm();
            assert!((2.0..=11.0).contains(&a), "{a}");
            assert!((ps.coeffs.column(0).norm() - 1.0).abs() < 1e-14);
            assert!((0.0..1.0).contains(&ps.taus[0]));
        }
    }

    #[test]
    fn separation_is_enforced() {
        for seed in 0..20 {
            let ps =
                sample_point_sources(&dims(64, 2, 4), &mut seeded(seed), Some(1.0 / 64.0)).unwrap();
            assert!(min_separation(&ps.taus) >= 1.0 / 64.0);
        }
    }

    #[test]
    fn infeasible_separation_fails_loudly() {
        let err = sample_point_sources(&dims(64, 2, 4), &mut seeded(0), Some(0.3)).unwrap_err();
        assert!(matches!(err, Error::SeparationInfeasible { .. }));
        // feasible in principle but practically unreachable inside the budget
        let err = sample_point_sources(&dims(64, 2, 9), &mut seeded(0), Some(0.11)).unwrap_err();
        assert!(matches!(
            err,
            Error::SeparationInfeasible {
                attempts: SEPARATION_BUDGET,
                ..
            }
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = dims(32, 3, 3);
        let a = sample_point_sources(&d, &mut seeded(11), Some(1.0 / 32.0)).unwrap();
        let b = sample_point_sources(&d, &mut seeded(11), Some(1.0 / 32.0)).unwrap();
        assert_eq!(a, b);
        let sa = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut seeded(2));
        let sb = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut seeded(2));
        assert_eq!(sa, sb);
    }

    #[test]
    fn steering_vector_examples() {
        let close = |a: &CVec, b: &[C64]| a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-15);
        let one = C64::new(1.0, 0.0);
        assert!(close(&steering_vector(0.0, 4), &[one; 4]));
        assert!(close(&steering_vector(0.5, 4), &[one, -one, one, -one]));
        assert!(close(
            &steering_vector(0.25, 2),
            &[one, C64::new(0.0, -1.0)]
        ));
        assert!(steering_vector(0.123, 50)
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn target_matrix_single_spike() {
        let d = dims(6, 3, 1);
        let mut coeffs = CMat::zeros(3, 1);
        coeffs[(0, 0)] = C64::new(1.0, 0.0);
        let ps = PointSources {
            taus: vec![0.0],
            amps: vec![C64::new(1.0, 0.0)],
            coeffs,
        };
        let x = build_target_matrix(&ps, &d).unwrap();
        for j in 0..6 {
            assert_eq!(x[(0, j)], C64::new(1.0, 0.0));
            assert_eq!(x[(1, j)], C64::new(0.0, 0.0));
            assert_eq!(x[(2, j)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn coincident_locations_collapse_rank() {
        let d = dims(16, 3, 2);
        let mut ps = sample_point_sources(&d, &mut seeded(4), None).unwrap();
        ps.taus[1] = ps.taus[0];
        let x = build_target_matrix(&ps, &d).unwrap();
        let z = hankel_ops::hankel_apply(&x, &d).unwrap();
        let sv = crate::linalg::singular_values(&z);
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn target_matrix_is_linear_in_amplitudes() {
        let d = dims(16, 2, 3);
        let ps = sample_point_sources(&d, &mut seeded(9), None).unwrap();
        let alpha = C64::new(-1.3, 0.7);
        let mut scaled = ps.clone();
        scaled.amps.iter_mut().for_each(|a| *a *= alpha);
        let x = build_target_matrix(&ps, &d).unwrap();
        let xs = build_target_matrix(&scaled, &d).unwrap();
        assert!((xs - x.clone() * alpha).norm() <= 1e-12 * x.norm() * alpha.norm());
    }

    #[test]
    fn lifted_target_has_rank_r() {
        let d = dims(16, 4, 3);
        let ps = sample_point_sources(&d, &mut seeded(21), None).unwrap();
        let x = build_target_matrix(&ps, &d).unwrap();
        let z = hankel_ops::hankel_apply(&x, &d).unwrap();
        let sv = crate::linalg::singular_values(&z);
        assert!(sv[3] / sv[2] < 1e-10, "{sv:?}");
    }

    #[test]
    fn subspace_kinds() {
        let d = dims(8, 2, 1);
        let rad = sample_subspace(&d, SubspaceKind::Rademacher, &mut seeded(1));
        assert!(rad.b.iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
        assert_eq!(rad.mu0, 1.0);
        let dft = sample_subspace(&d, SubspaceKind::DftRows, &mut seeded(1));
        assert!(dft.b.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        assert_eq!(dft.mu0, 1.0);
        let g = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut seeded(1));
        let max = g.b.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        assert_eq!(g.mu0, max);
    }

    #[test]
    fn empirical_isotropy() {
        let d = dims(4096, 3, 1);
        for kind in [
            SubspaceKind::DftRows,
            SubspaceKind::Rademacher,
            SubspaceKind::ComplexGaussian,
        ] {
            let sub = sample_subspace(&d, kind, &mut seeded(8));
            // (1/n) sum_j b_j b_j^H = (1/n) B^H B
            let cov = sub.b.adjoint() * &sub.b / C64::from(d.n as f64);
            let err = crate::linalg::singular_values(&(cov - CMat::identity(3, 3)))[0];
            assert!(err < 0.1, "{kind:?}: {err}");
        }
    }

    #[test]
    fn measurement_examples() {
        let d = dims(6, 1, 1);
        let ones = Subspace::from_matrix(
            CMat::from_element(6, 1, C64::new(1.0, 0.0)),
            SubspaceKind::Rademacher,
        );
        let x = CMat::from_fn(1, 6, |_, j| C64::new(j as f64, -(j as f64)));
        let m = measure(&x, &ones, &d).unwrap();
        assert_eq!(m.y, x.row(0).transpose());
        let w = hankel_ops::weights(&d);
        for j in 0..6 {
            assert!((m.weighted[j] - m.y[j] * w.sqrt_w[j]).norm() < 1e-15);
        }
        let zero = measure(&CMat::zeros(1, 6), &ones, &d).unwrap();
        assert!(zero.y.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn measurement_matches_trace_inner_product() {
        let d = dims(10, 3, 2);
        let mut rng = seeded(77);
        let sub = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut rng);
        let x = CMat::from_fn(3, 10, |_, _| complex_gaussian(&mut rng));
        let m = measure(&x, &sub, &d).unwrap();
        for j in 0..10 {
            // <b_j e_j^T, X> = tr((b_j e_j^T)^H X)
            let mut atom = CMat::zeros(3, 10);
            atom.set_column(j, &sub.b_vec(j));
            let expected = (atom.adjoint() * &x).trace();
            assert!((m.y[j] - expected).norm() < 1e-12 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn noise_has_exact_relative_level() {
        let d = dims(32, 2, 2);
        let inst = Instance::generate(d, SubspaceKind::DftRows, 3, None, 0.0).unwrap();
        let p = inst.materialize().unwrap();
        let w = hankel_ops::weights(&d);
        let same = add_noise(&p.clean, 0.0, &w, &mut seeded(1)).unwrap();
        assert_eq!(same, p.clean);
        for sigma in [1e-3, 0.1, 1.0] {
            let noisy = add_noise(&p.clean, sigma, &w, &mut seeded(1)).unwrap();
            let rel = (&noisy.y - &p.clean.y).norm() / p.clean.y.norm();
            assert!((rel - sigma).abs() <= 1e-12 * sigma);
        }
        assert_eq!(snr_db(1.0), 0.0);
        assert!((snr_db(1e-3) - 60.0).abs() < 1e-12);
        assert!(add_noise(&p.clean, -1.0, &w, &mut seeded(1)).is_err());
    }

    #[test]
    fn mu1_single_spike_is_small() {
        let d = ProblemDims::with_split(15, 2, 1, 8).unwrap();
        assert_eq!(d.n1, d.n2);
        let mut coeffs = CMat::zeros(2, 1);
        coeffs[(0, 0)] = C64::new(1.0, 0.0);
        let ps = PointSources {
            taus: vec![0.0],
            amps: vec![C64::new(1.0, 0.0)],
            coeffs,
        };
        let x = build_target_matrix(&ps, &d).unwrap();
        let inc = incoherence_mu1(&x, &d, 1).unwrap();
        // constant-modulus singular vectors: ||U_j||^2 = ||V_k||^2 = 1/8, mu1 = 15/8
        assert!((inc.mu1 - 15.0 / 8.0).abs() < 1e-10, "{inc:?}");
        assert!(!inc.rank_deficient);
        let zero = incoherence_mu1(&CMat::zeros(2, 15), &d, 1).unwrap();
        assert!(zero.rank_deficient);
        assert!(zero.mu1 > 0.0);
    }

    #[test]
    fn instance_json_round_trip() {
        let d = dims(24, 3, 2);
        let inst = Instance::generate(
            d,
            SubspaceKind::Rademacher,
            u64::MAX - 5,
            Some(1.0 / 24.0),
            0.01,
        )
        .unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let p = back.materialize().unwrap();
        let q = inst.materialize().unwrap();
        assert_eq!(p.measurements, q.measurements);
    }

    #[test]
    fn malformed_instance_is_rejected() {
        let d = dims(24, 3, 2);
        let mut inst = Instance::generate(d, SubspaceKind::DftRows, 1, None, 0.0).unwrap();
        inst.coeffs.pop();
        assert!(inst.materialize().is_err());
        assert!(Instance::from_json("{}").is_err());
    }
}
