//! Blind super-resolution of point sources via projected gradient descent on
//! the vectorized Hankel lift (PGD-VHL).
//!
//! The crate is organised bottom-up:
//!
//! * [`signal_model`] generates point-source instances, subspaces and
//!   measurements, and computes incoherence diagnostics.
//! * [`hankel_ops`] implements the lift `H`, its adjoint, the weights `w_i`
//!   and the normalised lift `G = H D^-1`, both densely and through FFT
//!   convolutions that never materialise the lifted matrix.
//! * [`measurement_ops`] is the sensing operator `A` and its adjoint.
//! * [`pgd_solver`] holds the objective, its Wirtinger gradient, the
//!   projection onto the incoherence set, spectral initialisation and the
//!   iteration loop.
//! * [`postprocess`] recovers locations (MUSIC) and weights (least squares)
//!   from an estimated data matrix.

pub mod error;
pub mod hankel_ops;
pub mod linalg;
pub mod measurement_ops;
pub mod pgd_solver;
pub mod postprocess;
pub mod rng;
pub mod signal_model;

pub use error::{Error, Result};
pub use hankel_ops::{HankelWorkspace, WeightVector};
pub use measurement_ops::SensingOperator;
pub use pgd_solver::{
    FactorPair, IterRecord, ProjectionParams, SigmaMode, SolveOutcome, SolverConfig, SolverTrace,
    StepMode, StopReason, Truth,
};
pub use postprocess::{MusicEstimate, RecoveryResult, WeightFit};
pub use signal_model::{Instance, Measurements, PointSources, ProblemDims, Subspace, SubspaceKind};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (column-major).
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
