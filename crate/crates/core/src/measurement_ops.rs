//! The sensing operator `A : C^{s x n} -> C^n`, `A(X)[j] = b_j^H x_j`, and
//! its adjoint `A*(v) = sum_j v[j] b_j e_j^T`.

use crate::error::{check_len, check_shape, Result};
use crate::hankel_ops::{HankelWorkspace, WeightVector};
use crate::signal_model::{Measurements, ProblemDims, Subspace};
use crate::{CMat, CVec, C64};

/// `y[j] = sum_l bt[l, j] x[l, j]` where column `j` of `bt` is row `j` of `B`.
pub(crate) fn apply_rows(bt: &CMat, x: &CMat) -> CVec {
    CVec::from_iterator(
        x.ncols(),
        bt.column_iter()
            .zip(x.column_iter())
            .map(|(b, col)| b.iter().zip(col.iter()).map(|(u, v)| u * v).sum::<C64>()),
    )
}

/// `A` and `A*` for one subspace. Rows of `B` are stored as contiguous
/// columns of an `s x n` matrix. Read-only after construction.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    bt: CMat,
    dims: ProblemDims,
    weights: WeightVector,
    mu0: f64,
}

impl SensingOperator {
    pub fn new(subspace: &Subspace, dims: &ProblemDims) -> Result<Self> {
        check_shape("SensingOperator::new", subspace.b.shape(), (dims.n, dims.s))?;
        Ok(SensingOperator {
            bt: subspace.b.transpose(),
            dims: *dims,
            weights: crate::hankel_ops::weights(dims),
            mu0: subspace.mu0,
        })
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn apply(&self, x: &CMat) -> Result<CVec> {
        check_shape(
            "SensingOperator::apply",
            x.shape(),
            (self.dims.s, self.dims.n),
        )?;
        Ok(apply_rows(&self.bt, x))
    }

    pub fn adjoint(&self, v: &CVec) -> Result<CMat> {
        check_len("SensingOperator::adjoint", v.len(), self.dims.n)?;
        let mut out = self.bt.map(|b| b.conj());
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= v[j];
        }
        Ok(out)
    }

    /// `A(G*(L R^H)) - D y`, never forming `L R^H`.
    pub fn residual(
        &self,
        l: &CMat,
        r: &CMat,
        m: &Measurements,
        ws: &mut HankelWorkspace,
    ) -> Result<CVec> {
        let gstar = ws.gstar_lowrank(l, r)?;
        self.residual_from_gstar(&gstar, m)
    }

    /// Same residual when `G*(L R^H)` is already available.
    pub fn residual_from_gstar(&self, gstar: &CMat, m: &Measurements) -> Result<CVec> {
        check_len("SensingOperator::residual", m.weighted.len(), self.dims.n)?;
        Ok(self.apply(gstar)? - &m.weighted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;
    use crate::rng::seeded;
    use crate::signal_model::{measure, sample_subspace, SubspaceKind};

    #[test]
    fn adjoint_examples() {
        let d = ProblemDims::new(8, 3, 1).unwrap();
        let sub = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut seeded(1));
        let op = SensingOperator::new(&sub, &d).unwrap();
        let mut e0 = CVec::zeros(8);
        e0[0] = C64::new(1.0, 0.0);
        let out = op.adjoint(&e0).unwrap();
        assert_eq!(out.column(0).into_owned(), sub.b_vec(0));
        assert!(out.columns(1, 7).iter().all(|z| z.norm() == 0.0));
        assert_eq!(op.adjoint(&CVec::zeros(8)).unwrap(), CMat::zeros(3, 8));
        assert!(op.adjoint(&CVec::zeros(7)).is_err());
    }

    #[test]
    fn unit_modulus_scalar_subspace_round_trips() {
        let d = ProblemDims::new(10, 1, 1).unwrap();
        let sub = sample_subspace(&d, SubspaceKind::DftRows, &mut seeded(2));
        let op = SensingOperator::new(&sub, &d).unwrap();
        let mut rng = seeded(3);
        let v = CVec::from_fn(10, |_, _| complex_gaussian(&mut rng));
        let back = op.apply(&op.adjoint(&v).unwrap()).unwrap();
        assert!((back - v).norm() < 1e-13);
    }

    #[test]
    fn apply_agrees_with_measure_and_is_linear() {
        let d = ProblemDims::new(12, 2, 1).unwrap();
        let mut rng = seeded(4);
        for kind in [SubspaceKind::DftRows, SubspaceKind::Rademacher] {
            let sub = sample_subspace(&d, kind, &mut rng);
            let op = SensingOperator::new(&sub, &d).unwrap();
            let x = CMat::from_fn(2, 12, |_, _| complex_gaussian(&mut rng));
            assert_eq!(op.apply(&x).unwrap(), measure(&x, &sub, &d).unwrap().y);
            let alpha = C64::new(0.3, -2.0);
            let lhs = op.apply(&(&x * alpha)).unwrap();
            let rhs = op.apply(&x).unwrap() * alpha;
            assert!((lhs - &rhs).norm() <= 1e-13 * rhs.norm());
        }
    }

    #[test]
    fn weighting_commutes_with_sensing() {
        let d = ProblemDims::new(12, 3, 1).unwrap();
        let mut rng = seeded(5);
        let sub = sample_subspace(&d, SubspaceKind::ComplexGaussian, &mut rng);
        let op = SensingOperator::new(&sub, &d).unwrap();
        let x = CMat::from_fn(3, 12, |_, _| complex_gaussian(&mut rng));
        let lhs = op.weights().scale_vec(&op.apply(&x).unwrap());
        let rhs = op.apply(&op.weights().scale_cols(&x)).unwrap();
        assert!((lhs - &rhs).norm() <= 1e-13 * rhs.norm());
    }
}
