//! Dense straight-line oracles. Every operator is materialised as an explicit
//! matrix acting on column-major `vec(.)`, so nothing here shares code with
//! the FFT paths under test.

#![allow(dead_code)]

use pgd_vhl::linalg::complex_gaussian;
use pgd_vhl::rng::{seeded, SeededRng};
use pgd_vhl::{CMat, CVec, FactorPair, ProblemDims, Subspace, C64};

pub fn random_mat(m: usize, n: usize, rng: &mut SeededRng) -> CMat {
    CMat::from_fn(m, n, |_, _| complex_gaussian(rng))
}

pub fn random_pair(dims: &ProblemDims, rng: &mut SeededRng) -> FactorPair {
    FactorPair {
        l: random_mat(dims.lifted_rows(), dims.r, rng),
        r: random_mat(dims.n2, dims.r, rng),
    }
}

pub fn rng(seed: u64) -> SeededRng {
    seeded(seed)
}

fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

fn count_weight(dims: &ProblemDims, i: usize) -> usize {
    let mut count = 0;
    for j in 0..dims.n1 {
        for k in 0..dims.n2 {
            if j + k == i {
                count += 1;
            }
        }
    }
    count
}

/// Explicit operators for one problem shape.
pub struct DenseOracle {
    pub dims: ProblemDims,
    /// `vec(H(X)) = h * vec(X)`.
    pub h: CMat,
    /// `G = H D^-1`.
    pub g: CMat,
    /// `A(X) = a * vec(X)`.
    pub a: Option<CMat>,
    pub sqrt_w: Vec<f64>,
}

impl DenseOracle {
    pub fn new(dims: &ProblemDims) -> Self {
        let (s, n, n1, n2) = (dims.s, dims.n, dims.n1, dims.n2);
        let rows = s * n1;
        let mut h = CMat::zeros(rows * n2, s * n);
        for k in 0..n2 {
            for j in 0..n1 {
                for l in 0..s {
                    let out = (j * s + l) + rows * k;
                    let inp = l + s * (j + k);
                    h[(out, inp)] = C64::new(1.0, 0.0);
                }
            }
        }
        let sqrt_w: Vec<f64> = (0..n)
            .map(|i| (count_weight(dims, i) as f64).sqrt())
            .collect();
        let mut g = h.clone();
        for i in 0..n {
            for l in 0..s {
                let mut col = g.column_mut(l + s * i);
                col /= C64::from(sqrt_w[i]);
            }
        }
        DenseOracle {
            dims: *dims,
            h,
            g,
            a: None,
            sqrt_w,
        }
    }

    pub fn with_subspace(mut self, sub: &Subspace) -> Self {
        let (s, n) = (self.dims.s, self.dims.n);
        let mut a = CMat::zeros(n, s * n);
        for j in 0..n {
            for l in 0..s {
                a[(j, l + s * j)] = sub.b[(j, l)];
            }
        }
        self.a = Some(a);
        self
    }

    pub fn lift(&self, x: &CMat) -> CMat {
        unvec(
            &(&self.h * vec_of(x)),
            self.dims.lifted_rows(),
            self.dims.n2,
        )
    }

    pub fn lift_adjoint(&self, z: &CMat) -> CMat {
        unvec(&(self.h.adjoint() * vec_of(z)), self.dims.s, self.dims.n)
    }

    pub fn g_apply(&self, x: &CMat) -> CMat {
        unvec(
            &(&self.g * vec_of(x)),
            self.dims.lifted_rows(),
            self.dims.n2,
        )
    }

    pub fn g_adjoint(&self, z: &CMat) -> CMat {
        unvec(&(self.g.adjoint() * vec_of(z)), self.dims.s, self.dims.n)
    }

    pub fn sense(&self, x: &CMat) -> CVec {
        self.a.as_ref().expect("subspace attached") * vec_of(x)
    }

    pub fn sense_adjoint(&self, v: &CVec) -> CMat {
        unvec(
            &(self.a.as_ref().expect("subspace attached").adjoint() * v),
            self.dims.s,
            self.dims.n,
        )
    }

    pub fn weighted(&self, y: &CVec) -> CVec {
        CVec::from_fn(y.len(), |i, _| y[i] * self.sqrt_w[i])
    }

    /// Straight-line objective with the dense lifted matrix `L R^H`.
    pub fn objective(&self, m: &FactorPair, y: &CVec) -> f64 {
        let z = &m.l * m.r.adjoint();
        let zv = vec_of(&z);
        let a = self.a.as_ref().expect("subspace attached");
        let gstar = self.g.adjoint() * &zv;
        let fit = self.weighted(y) - a * &gstar;
        let off = &zv - &self.g * &gstar;
        let bal = m.l.adjoint() * &m.l - m.r.adjoint() * &m.r;
        0.5 * fit.norm_squared() + 0.5 * off.norm_squared() + bal.norm_squared() / 16.0
    }

    /// The gradient formulas evaluated with dense matrices.
    pub fn gradient(&self, m: &FactorPair, y: &CVec) -> FactorPair {
        let (rows, n2) = (self.dims.lifted_rows(), self.dims.n2);
        let z = &m.l * m.r.adjoint();
        let zv = vec_of(&z);
        let a = self.a.as_ref().expect("subspace attached");
        let res = a * (self.g.adjoint() * &zv) - self.weighted(y);
        let e = unvec(&(&self.g * (a.adjoint() * res)), rows, n2);
        let k = unvec(&(&zv - &self.g * (self.g.adjoint() * &zv)), rows, n2);
        let ek = e + k;
        let diff = m.l.adjoint() * &m.l - m.r.adjoint() * &m.r;
        let q = C64::from(0.25);
        FactorPair {
            l: &ek * &m.r + &m.l * &diff * q,
            r: ek.adjoint() * &m.l - &m.r * &diff * q,
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn rel_mat(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
