//! Small dense linear-algebra helpers: truncated SVD (dense and randomized
//! block power iteration), least squares, Frobenius inner products and
//! orthogonal Procrustes alignment.
//!
//! Storage and arithmetic use nalgebra; every factorization is delegated to
//! faer.

use faer::Mat;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::SeededRng;
use crate::{CMat, CVec, C64};

fn to_faer(a: &CMat) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `(U, sigma, V)` with singular values descending.
pub fn thin_svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    if a.nrows() == 0 || a.ncols() == 0 {
        let k = a.nrows().min(a.ncols());
        return (
            CMat::zeros(a.nrows(), k),
            Vec::new(),
            CMat::zeros(a.ncols(), k),
        );
    }
    let svd = to_faer(a).thin_svd().expect("SVD converges");
    let s = svd.S().column_vector();
    let sigma = (0..s.nrows()).map(|i| s[i].re).collect();
    (from_faer(svd.U()), sigma, from_faer(svd.V()))
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv = to_faer(a).singular_values().expect("SVD converges");
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Orthonormal basis of the column space (thin `Q` of a QR factorization).
pub fn orthonormalize(y: &CMat) -> CMat {
    from_faer(to_faer(y).qr().compute_thin_Q().as_ref())
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond * sigma_max`. Also returns the singular values.
pub fn least_squares(a: &CMat, b: &CVec, rcond: f64) -> (CVec, Vec<f64>) {
    let (u, sigma, v) = thin_svd(a);
    let top = sigma.first().copied().unwrap_or(0.0);
    let utb = u.adjoint() * b;
    let scaled = CVec::from_fn(sigma.len(), |i, _| {
        if sigma[i] > rcond * top && sigma[i] > 0.0 {
            utb[i] / sigma[i]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    (v * scaled, sigma)
}

/// Rank-`k` truncated SVD `U diag(sigma) V^H`, singular values descending.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: CMat,
    pub sigma: DVector<f64>,
    pub v: CMat,
}

/// How the rank-`r` truncation in the spectral initialisation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvdMethod {
    /// Block power iteration; falls back to `Dense` when the sketch would not
    /// be smaller than the matrix.
    Randomized {
        oversampling: usize,
        power_iters: usize,
    },
    Dense,
}

impl Default for SvdMethod {
    fn default() -> Self {
        SvdMethod::Randomized {
            oversampling: 8,
            power_iters: 30,
        }
    }
}

/// Largest matrix side for which the dense SVD is the authoritative route.
pub const DENSE_SVD_LIMIT: usize = 512;

pub fn dense_truncated_svd(z: &CMat, k: usize) -> TruncatedSvd {
    let k = k.min(z.nrows().min(z.ncols()));
    let (u, sigma, v) = thin_svd(z);
    TruncatedSvd {
        u: u.columns(0, k).into_owned(),
        sigma: DVector::from_iterator(k, sigma.into_iter().take(k)),
        v: v.columns(0, k).into_owned(),
    }
}

pub fn randomized_truncated_svd(
    z: &CMat,
    k: usize,
    oversampling: usize,
    power_iters: usize,
    rng: &mut SeededRng,
) -> TruncatedSvd {
    let (m, n) = z.shape();
    let width = k + oversampling;
    if width >= m.min(n) {
        return dense_truncated_svd(z, k);
    }
    let omega = CMat::from_fn(n, width, |_, _| complex_gaussian(rng));
    let mut q = orthonormalize(&(z * omega));
    let zh = z.adjoint();
    for _ in 0..power_iters {
        let w = orthonormalize(&(&zh * &q));
        q = orthonormalize(&(z * w));
    }
    let small = q.adjoint() * z;
    let inner = dense_truncated_svd(&small, k);
    TruncatedSvd {
        u: q * inner.u,
        sigma: inner.sigma,
        v: inner.v,
    }
}

pub fn truncated_svd(z: &CMat, k: usize, method: SvdMethod, rng: &mut SeededRng) -> TruncatedSvd {
    match method {
        SvdMethod::Dense => dense_truncated_svd(z, k),
        SvdMethod::Randomized {
            oversampling,
            power_iters,
        } => randomized_truncated_svd(z, k, oversampling, power_iters, rng),
    }
}

/// Unit-variance circular complex Gaussian (variance 1/2 per component).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `<a, b> = tr(a^H b)`.
pub fn inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn fro_norm_sq(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn vec_norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Unitary `Q` minimising `||m - m_ref Q||_F`.
pub fn procrustes_unitary(m: &CMat, m_ref: &CMat) -> CMat {
    let cross = m_ref.adjoint() * m;
    let (w, _, y) = thin_svd(&cross);
    w * y.adjoint()
}
