//! Parameter retrieval from an estimated data matrix.
//!
//! Locations come from a MUSIC pseudospectrum built on the left singular
//! space `U` of `H(X)`: the candidate subspace at `tau` is spanned by the
//! columns of `a_tau ⊗ I_s`, and
//!
//! ```text
//! d(tau) = lambda_min((a ⊗ I)^H (I - U U^H) (a ⊗ I)) / n1 = 1 - ||U^H (a ⊗ I)||_2^2 / n1
//! ```
//!
//! vanishes exactly at the true locations. The grid scan evaluates
//! `U^H (a ⊗ I)` for all grid points at once with FFTs; peaks are refined by
//! golden-section search. Weights then follow from linear least squares.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel_ops::hankel_apply;
use crate::linalg::{dense_truncated_svd, least_squares, singular_values};
use crate::signal_model::{wrap_distance, Measurements, ProblemDims, Subspace};
use crate::{CMat, CVec, C64};

use std::f64::consts::PI;

/// Default grid density, in points per sample.
pub const GRID_FACTOR: usize = 16;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    /// Sorted ascending in `[0, 1)`.
    pub taus: Vec<f64>,
    /// Fewer than `r` separated peaks were found.
    pub deficient: bool,
}

/// Noise-space distance `d(tau)` for a fixed signal basis.
struct NoiseSpace {
    u: CMat,
    s: usize,
    n1: usize,
}

impl NoiseSpace {
    fn gap(&self, cross: &CMat) -> f64 {
        let top = singular_values(cross).first().copied().unwrap_or(0.0);
        1.0 - top * top / self.n1 as f64
    }

    /// `d(tau)` as `sigma_min((I - U U^H)(a ⊗ I))^2 / n1`. Slower than
    /// [`Self::gap`] but free of the cancellation in `1 - ||.||^2`, which
    /// matters when resolving the bottom of a peak.
    fn distance_at(&self, tau: f64) -> f64 {
        let mut basis = CMat::zeros(self.n1 * self.s, self.s);
        for j in 0..self.n1 {
            let phase = (tau * j as f64).rem_euclid(1.0);
            let e = C64::from_polar(1.0, -2.0 * PI * phase);
            for l in 0..self.s {
                basis[(j * self.s + l, l)] = e;
            }
        }
        let residual = &basis - &self.u * (self.u.adjoint() * &basis);
        let low = singular_values(&residual).last().copied().unwrap_or(0.0);
        low * low / self.n1 as f64
    }

    /// `d` on the uniform grid `g / grid` for `g = 0..grid`.
    fn scan(&self, grid: usize) -> Vec<f64> {
        let k = self.u.ncols();
        let fft = FftPlanner::new().plan_fft_forward(grid);
        let mut spectra = Vec::with_capacity(k * self.s);
        for col in 0..k {
            for l in 0..self.s {
                let mut buf = vec![C64::new(0.0, 0.0); grid];
                for j in 0..self.n1 {
                    buf[j] = self.u[(j * self.s + l, col)].conj();
                }
                fft.process(&mut buf);
                spectra.push(buf);
            }
        }
        (0..grid)
            .map(|g| {
                let cross = CMat::from_fn(k, self.s, |col, l| spectra[col * self.s + l][g]);
                self.gap(&cross)
            })
            .collect()
    }

    fn refine(&self, center: f64, half_width: f64, tol: f64) -> f64 {
        let (mut a, mut b) = (center - half_width, center + half_width);
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let mut f1 = self.distance_at(x1);
        let mut f2 = self.distance_at(x2);
        while b - a > tol {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = self.distance_at(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = self.distance_at(x2);
            }
        }
        (0.5 * (a + b)).rem_euclid(1.0)
    }
}

fn signal_space(x_hat: &CMat, dims: &ProblemDims, r: usize) -> Result<Option<NoiseSpace>> {
    let z = hankel_apply(x_hat, dims)?;
    let svd = dense_truncated_svd(&z, r);
    let top = svd.sigma.get(0).copied().unwrap_or(0.0);
    if !(top > 0.0) || !top.is_finite() {
        return Ok(None);
    }
    Ok(Some(NoiseSpace {
        u: svd.u,
        s: dims.s,
        n1: dims.n1,
    }))
}

/// MUSIC pseudospectrum `1 / d(tau)` on a uniform grid of `grid_size` points.
pub fn pseudospectrum(
    x_hat: &CMat,
    dims: &ProblemDims,
    r: usize,
    grid_size: usize,
) -> Result<Vec<f64>> {
    match signal_space(x_hat, dims, r)? {
        Some(space) => Ok(space
            .scan(grid_size)
            .into_iter()
            .map(|d| 1.0 / d.max(f64::MIN_POSITIVE))
            .collect()),
        None => Ok(vec![1.0; grid_size]),
    }
}

/// Locations of the `r` strongest pseudospectrum peaks, separated by at
/// least `1/(2n)` and refined to `1e-8` of a grid cell.
pub fn music_locations(
    x_hat: &CMat,
    dims: &ProblemDims,
    r: usize,
    grid_size: usize,
) -> Result<MusicEstimate> {
    if grid_size < 8 * dims.n {
        return Err(Error::InvalidConfig(format!(
            "MUSIC grid must have at least 8n = {} points, got {grid_size}",
            8 * dims.n
        )));
    }
    let space = match signal_space(x_hat, dims, r)? {
        Some(space) => space,
        None => {
            return Ok(MusicEstimate {
                taus: Vec::new(),
                deficient: true,
            })
        }
    };
    let d = space.scan(grid_size);
    let g = grid_size;
    // local minima of d are local maxima of the pseudospectrum
    let mut peaks: Vec<usize> = (0..g)
        .filter(|&i| {
            let prev = d[(i + g - 1) % g];
            let next = d[(i + 1) % g];
            d[i] < prev && d[i] <= next
        })
        .collect();
    peaks.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let min_gap = 1.0 / (2.0 * dims.n as f64);
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    for p in peaks {
        if chosen.len() == r {
            break;
        }
        let tau = p as f64 / g as f64;
        if chosen
            .iter()
            .all(|&q| wrap_distance(tau, q as f64 / g as f64) >= min_gap)
        {
            chosen.push(p);
        }
    }
    let cell = 1.0 / g as f64;
    let mut taus: Vec<f64> = chosen
        .iter()
        .map(|&p| space.refine(p as f64 * cell, cell, 1e-8 * cell))
        .collect();
    taus.sort_by(f64::total_cmp);
    Ok(MusicEstimate {
        deficient: taus.len() < r,
        taus,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFit {
    /// `v_k ≈ d_k h_k`.
    pub vectors: Vec<CVec>,
    /// `||v_k||`, the amplitude under the unit-norm convention for `h_k`.
    pub amplitudes: Vec<f64>,
    /// `v_k / ||v_k||`; the phase of `d_k` is absorbed here.
    pub directions: Vec<CVec>,
    pub rank_deficient: bool,
}

/// Least-squares fit of `y[j] ≈ sum_k e^{-2 pi i tau_k j} b_j^H v_k`.
pub fn solve_weights(taus: &[f64], m: &Measurements, subspace: &Subspace) -> Result<WeightFit> {
    let n = m.y.len();
    let s = subspace.b.ncols();
    let r = taus.len();
    if subspace.b.nrows() != n {
        return Err(Error::DimensionMismatch {
            op: "solve_weights",
            expected: format!("{n} subspace rows"),
            got: subspace.b.nrows().to_string(),
        });
    }
    if r * s > n {
        return Err(Error::InvalidDims(format!(
            "least squares needs r*s <= n, got {} > {n}",
            r * s
        )));
    }
    let design = CMat::from_fn(n, r * s, |j, col| {
        let (k, l) = (col / s, col % s);
        let phase = (taus[k] * j as f64).rem_euclid(1.0);
        C64::from_polar(1.0, -2.0 * PI * phase) * subspace.b[(j, l)]
    });
    let (coef, sv) = least_squares(&design, &m.y, 1e-12);
    let top = sv.first().copied().unwrap_or(0.0);
    let bottom = sv.last().copied().unwrap_or(0.0);
    let rank_deficient = r == 0 || !(bottom > 1e-10 * top);
    let vectors: Vec<CVec> = (0..r).map(|k| coef.rows(k * s, s).into_owned()).collect();
    let amplitudes: Vec<f64> = vectors.iter().map(|v| v.norm()).collect();
    let directions = vectors
        .iter()
        .zip(&amplitudes)
        .map(|(v, &a)| if a > 0.0 { v / C64::from(a) } else { v.clone() })
        .collect();
    Ok(WeightFit {
        vectors,
        amplitudes,
        directions,
        rank_deficient,
    })
}

/// Everything recovered from one solve.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub x_hat: CMat,
    pub taus_hat: Vec<f64>,
    pub weights_hat: Vec<CVec>,
    /// `||y - A(X_hat)||_2`.
    pub residual: f64,
    pub music_deficient: bool,
    pub weights_rank_deficient: bool,
}

/// JSON form of [`RecoveryResult`]; complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub taus_hat: Vec<f64>,
    pub weights_hat: Vec<Vec<[f64; 2]>>,
    pub amplitudes_hat: Vec<f64>,
    pub residual: f64,
    pub music_deficient: bool,
    pub weights_rank_deficient: bool,
    /// Row-major `s x n`.
    pub x_hat: Vec<[f64; 2]>,
    pub s: usize,
    pub n: usize,
}

impl RecoveryResult {
    pub fn report(&self) -> RecoveryReport {
        let pair = |z: &C64| [z.re, z.im];
        let (s, n) = self.x_hat.shape();
        RecoveryReport {
            taus_hat: self.taus_hat.clone(),
            weights_hat: self
                .weights_hat
                .iter()
                .map(|v| v.iter().map(pair).collect())
                .collect(),
            amplitudes_hat: self.weights_hat.iter().map(|v| v.norm()).collect(),
            residual: self.residual,
            music_deficient: self.music_deficient,
            weights_rank_deficient: self.weights_rank_deficient,
            x_hat: (0..s)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| pair(&self.x_hat[(i, j)]))
                .collect(),
            s,
            n,
        }
    }
}

/// MUSIC on `x_hat` followed by the weight fit against `m`.
pub fn recover(
    x_hat: &CMat,
    m: &Measurements,
    subspace: &Subspace,
    dims: &ProblemDims,
    grid_size: usize,
) -> Result<RecoveryResult> {
    let music = music_locations(x_hat, dims, dims.r, grid_size)?;
    let fit = if music.taus.is_empty() {
        None
    } else {
        Some(solve_weights(&music.taus, m, subspace)?)
    };
    let op = crate::measurement_ops::SensingOperator::new(subspace, dims)?;
    let residual = (&m.y - op.apply(x_hat)?).norm();
    Ok(RecoveryResult {
        x_hat: x_hat.clone(),
        taus_hat: music.taus,
        weights_rank_deficient: fit.as_ref().is_none_or(|f| f.rank_deficient),
        weights_hat: fit.map(|f| f.vectors).unwrap_or_default(),
        residual,
        music_deficient: music.deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{build_target_matrix, measure, PointSources, SubspaceKind};

    fn one_spike(tau: f64, s: usize) -> PointSources {
        let mut coeffs = CMat::zeros(s, 1);
        coeffs[(0, 0)] = C64::new(1.0, 0.0);
        PointSources {
            taus: vec![tau],
            amps: vec![C64::new(2.0, 1.0)],
            coeffs,
        }
    }

    #[test]
    fn single_spike_location() {
        let dims = ProblemDims::new(32, 1, 1).unwrap();
        let x = build_target_matrix(&one_spike(0.3, 1), &dims).unwrap();
        let est = music_locations(&x, &dims, 1, 16 * 32).unwrap();
        assert!(!est.deficient);
        assert!(wrap_distance(est.taus[0], 0.3) < 1e-6, "{:?}", est.taus);
    }

    #[test]
    fn zero_matrix_is_deficient() {
        let dims = ProblemDims::new(32, 2, 2).unwrap();
        let est = music_locations(&CMat::zeros(2, 32), &dims, 2, 16 * 32).unwrap();
        assert!(est.deficient);
        assert!(est.taus.is_empty());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let dims = ProblemDims::new(32, 1, 1).unwrap();
        assert!(music_locations(&CMat::zeros(1, 32), &dims, 1, 100).is_err());
    }

    #[test]
    fn scalar_weight_fit() {
        let dims = ProblemDims::new(16, 1, 1).unwrap();
        let ones = Subspace::from_matrix(
            CMat::from_element(16, 1, C64::new(1.0, 0.0)),
            SubspaceKind::Rademacher,
        );
        let ps = one_spike(0.2, 1);
        let x = build_target_matrix(&ps, &dims).unwrap();
        let m = measure(&x, &ones, &dims).unwrap();
        let fit = solve_weights(&[0.2], &m, &ones).unwrap();
        assert!((fit.vectors[0][0] - C64::new(2.0, 1.0)).norm() < 1e-12);
        assert!((fit.amplitudes[0] - 5f64.sqrt()).abs() < 1e-12);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn duplicated_locations_flag_rank_deficiency() {
        let dims = ProblemDims::new(16, 1, 1).unwrap();
        let ones = Subspace::from_matrix(
            CMat::from_element(16, 1, C64::new(1.0, 0.0)),
            SubspaceKind::Rademacher,
        );
        let x = build_target_matrix(&one_spike(0.2, 1), &dims).unwrap();
        let m = measure(&x, &ones, &dims).unwrap();
        let fit = solve_weights(&[0.2, 0.2], &m, &ones).unwrap();
        assert!(fit.rank_deficient);
    }

    #[test]
    fn pseudospectrum_peaks_at_source() {
        let dims = ProblemDims::new(32, 2, 1).unwrap();
        let x = build_target_matrix(&one_spike(0.25, 2), &dims).unwrap();
        let p = pseudospectrum(&x, &dims, 1, 512).unwrap();
        let argmax = (0..512).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 128);
    }
}
