//! The vectorized Hankel lift and its relatives.
//!
//! `H` maps an `s x n` matrix to the `(s*n1) x n2` block-Hankel matrix whose
//! block `(j, k)` is column `x_{j+k}`. `H*` sums anti-diagonal blocks, and
//! `H*H` scales column `i` by the anti-diagonal multiplicity `w_i`. With
//! `D = diag(sqrt(w_i))` the normalised lift `G = H D^-1` is an isometry.
//!
//! Dense versions are the reference. [`HankelWorkspace`] evaluates the
//! products the solver needs through zero-padded FFT convolutions, without
//! forming any `(s*n1) x n2` matrix. The block permutation that relates `H`
//! to stacked per-channel Hankel matrices is realised by indexing only.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{check_shape, Result};
use crate::signal_model::ProblemDims;
use crate::{CMat, CVec, C64};

/// Anti-diagonal multiplicities `w_i = min(i+1, n1, n2, n-i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<usize>,
    pub sqrt_w: Vec<f64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `D y`.
    pub fn scale_vec(&self, y: &CVec) -> CVec {
        CVec::from_fn(y.len(), |i, _| y[i] * self.sqrt_w[i])
    }

    /// `D^-1 y`.
    pub fn unscale_vec(&self, y: &CVec) -> CVec {
        CVec::from_fn(y.len(), |i, _| y[i] / self.sqrt_w[i])
    }

    /// `D X`: column `i` times `sqrt(w_i)`.
    pub fn scale_cols(&self, x: &CMat) -> CMat {
        let mut out = x.clone();
        for (i, mut col) in out.column_iter_mut().enumerate() {
            col *= C64::from(self.sqrt_w[i]);
        }
        out
    }

    /// `D^-1 X`.
    pub fn unscale_cols(&self, x: &CMat) -> CMat {
        let mut out = x.clone();
        for (i, mut col) in out.column_iter_mut().enumerate() {
            col /= C64::from(self.sqrt_w[i]);
        }
        out
    }
}

pub fn weights(dims: &ProblemDims) -> WeightVector {
    let n = dims.n;
    let w: Vec<usize> = (0..n)
        .map(|i| (i + 1).min(dims.n1).min(dims.n2).min(n - i))
        .collect();
    let sqrt_w = w.iter().map(|&v| (v as f64).sqrt()).collect();
    WeightVector { w, sqrt_w }
}

/// Dense `H(X)`.
pub fn hankel_apply(x: &CMat, dims: &ProblemDims) -> Result<CMat> {
    check_shape("hankel_apply", x.shape(), (dims.s, dims.n))?;
    let s = dims.s;
    Ok(CMat::from_fn(s * dims.n1, dims.n2, |row, k| {
        let (j, l) = (row / s, row % s);
        x[(l, j + k)]
    }))
}

/// Dense `H*(Z)`: column `i` is the sum of blocks `z_{j,k}` with `j + k = i`.
pub fn hankel_adjoint(z: &CMat, dims: &ProblemDims) -> Result<CMat> {
    check_shape("hankel_adjoint", z.shape(), (dims.lifted_rows(), dims.n2))?;
    let s = dims.s;
    let mut out = CMat::zeros(s, dims.n);
    for k in 0..dims.n2 {
        for j in 0..dims.n1 {
            for l in 0..s {
                out[(l, j + k)] += z[(j * s + l, k)];
            }
        }
    }
    Ok(out)
}

/// Dense `G(X) = H(D^-1 X)`.
pub fn g_apply(x: &CMat, dims: &ProblemDims) -> Result<CMat> {
    check_shape("g_apply", x.shape(), (dims.s, dims.n))?;
    hankel_apply(&weights(dims).unscale_cols(x), dims)
}

/// Dense `G*(Z) = D^-1 H*(Z)`.
pub fn g_adjoint(z: &CMat, dims: &ProblemDims) -> Result<CMat> {
    Ok(weights(dims).unscale_cols(&hankel_adjoint(z, dims)?))
}

/// Smallest FFT length used for the linear convolutions of length-`n` data.
pub fn transform_len(n: usize) -> usize {
    n.next_power_of_two()
}

/// FFT plans and scratch buffers for the fast lift products of one problem
/// shape. Single owner; create one per solver.
pub struct HankelWorkspace {
    dims: ProblemDims,
    weights: WeightVector,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl std::fmt::Debug for HankelWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HankelWorkspace")
            .field("dims", &self.dims)
            .field("len", &self.len)
            .finish()
    }
}

impl HankelWorkspace {
    pub fn new(dims: &ProblemDims) -> Self {
        let len = transform_len(dims.n);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        HankelWorkspace {
            dims: *dims,
            weights: weights(dims),
            len,
            forward,
            inverse,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    fn spectrum<I: IntoIterator<Item = C64>>(&mut self, values: I) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.len];
        for (slot, v) in buf.iter_mut().zip(values) {
            *slot = v;
        }
        self.forward
            .process_with_scratch(&mut buf, &mut self.scratch);
        buf
    }

    fn invert(&mut self, buf: &mut [C64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    /// `H*(L R^H)` without forming `L R^H`: for every channel the blocks of
    /// `L` are convolved with `conj(R)` column by column.
    pub fn hstar_lowrank(&mut self, l: &CMat, r: &CMat) -> Result<CMat> {
        let ProblemDims { s, n, n1, n2, .. } = self.dims;
        let rank = l.ncols();
        check_shape("hstar_lowrank", l.shape(), (s * n1, rank))?;
        check_shape("hstar_lowrank", r.shape(), (n2, rank))?;
        let r_spec: Vec<Vec<C64>> = (0..rank)
            .map(|c| self.spectrum(r.column(c).iter().map(|v| v.conj())))
            .collect();
        let mut out = CMat::zeros(s, n);
        let mut acc = vec![C64::new(0.0, 0.0); self.len];
        for ch in 0..s {
            acc.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (c, rs) in r_spec.iter().enumerate() {
                let lf = self.spectrum((0..n1).map(|j| l[(j * s + ch, c)]));
                for ((a, x), y) in acc.iter_mut().zip(&lf).zip(rs) {
                    *a += x * y;
                }
            }
            self.invert(&mut acc);
            for i in 0..n {
                out[(ch, i)] = acc[i];
            }
        }
        Ok(out)
    }

    /// `G*(L R^H) = D^-1 H*(L R^H)`.
    pub fn gstar_lowrank(&mut self, l: &CMat, r: &CMat) -> Result<CMat> {
        let h = self.hstar_lowrank(l, r)?;
        Ok(self.weights.unscale_cols(&h))
    }

    /// `H(X) R`, an `(s*n1) x r` matrix, via reversed-vector convolutions:
    /// `(H_v(x) R)[j, c] = (rev(x) * R[:, c])[n - 1 - j]`.
    pub fn h_times_r(&mut self, x: &CMat, r: &CMat) -> Result<CMat> {
        let ProblemDims { s, n, n1, n2, .. } = self.dims;
        let rank = r.ncols();
        check_shape("h_times_r", x.shape(), (s, n))?;
        check_shape("h_times_r", r.shape(), (n2, rank))?;
        let r_spec: Vec<Vec<C64>> = (0..rank)
            .map(|c| self.spectrum(r.column(c).iter().copied()))
            .collect();
        let mut out = CMat::zeros(s * n1, rank);
        for ch in 0..s {
            let xf = self.spectrum((0..n).rev().map(|i| x[(ch, i)]));
            for (c, rs) in r_spec.iter().enumerate() {
                let mut prod: Vec<C64> = xf.iter().zip(rs).map(|(a, b)| a * b).collect();
                self.invert(&mut prod);
                for j in 0..n1 {
                    out[(j * s + ch, c)] = prod[n - 1 - j];
                }
            }
        }
        Ok(out)
    }

    /// `G(X) R = H(D^-1 X) R`.
    pub fn g_times_r(&mut self, x: &CMat, r: &CMat) -> Result<CMat> {
        check_shape("g_times_r", x.shape(), (self.dims.s, self.dims.n))?;
        let scaled = self.weights.unscale_cols(x);
        self.h_times_r(&scaled, r)
    }

    /// `H(W)^H L`, an `n2 x r` matrix, by correlating each channel of `W`
    /// with the matching rows of the blocks of `L` and summing over channels.
    pub fn h_adjoint_times_l(&mut self, w: &CMat, l: &CMat) -> Result<CMat> {
        let ProblemDims { s, n, n1, n2, .. } = self.dims;
        let rank = l.ncols();
        check_shape("h_adjoint_times_l", w.shape(), (s, n))?;
        check_shape("h_adjoint_times_l", l.shape(), (s * n1, rank))?;
        let w_spec: Vec<Vec<C64>> = (0..s)
            .map(|ch| self.spectrum((0..n).rev().map(|i| w[(ch, i)])))
            .collect();
        let mut out = CMat::zeros(n2, rank);
        let mut acc = vec![C64::new(0.0, 0.0); self.len];
        for c in 0..rank {
            acc.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (ch, ws) in w_spec.iter().enumerate() {
                let lf = self.spectrum((0..n1).map(|j| l[(j * s + ch, c)].conj()));
                for ((a, x), y) in acc.iter_mut().zip(ws).zip(&lf) {
                    *a += x * y;
                }
            }
            self.invert(&mut acc);
            for k in 0..n2 {
                out[(k, c)] = acc[n - 1 - k].conj();
            }
        }
        Ok(out)
    }
}

/// One-shot `G*(L R^H)`; prefer a reused [`HankelWorkspace`] in loops.
pub fn fast_gstar_lowrank(l: &CMat, r: &CMat, dims: &ProblemDims) -> Result<CMat> {
    HankelWorkspace::new(dims).gstar_lowrank(l, r)
}

/// One-shot `G(X) R = H(D^-1 X) R`.
pub fn fast_g_times_r(x: &CMat, r: &CMat, dims: &ProblemDims) -> Result<CMat> {
    HankelWorkspace::new(dims).g_times_r(x, r)
}
