//! Estimation-theoretic error and disturbance for finite-dimensional quantum
//! measurements.
//!
//! The library represents states, observables and Kraus measurements over a
//! fixed orthonormal su(d) generator basis, computes classical and quantum
//! (SLD/RLD) Fisher information, evaluates the error and disturbance
//! functionals and their trade-off bounds, constructs the bound-attaining
//! measurement scheme, and runs Monte Carlo estimation experiments.
//!
//! All values are immutable after construction and safe to share across
//! threads. The `parallel` feature (on by default) runs the randomized
//! sweeps and Monte Carlo trials on rayon; without it the same code runs
//! sequentially with identical results.

#![forbid(unsafe_code)]

pub mod errdist;
pub mod fisher;
mod linalg;
pub mod optmeas;
pub mod parallel;
pub mod quantum_core;
pub mod randgen;
pub mod simulate;
pub mod su_basis;

pub use errdist::{ExtendedValue, SubspaceDecomposition, TradeoffReport};
pub use parallel::configure_threads;
pub use fisher::{FisherKind, FisherMatrix, StateFamily};
pub use quantum_core::{DensityMatrix, KrausMeasurement, Observable, Povm};
pub use su_basis::{BlochCoords, GeneratorBasis};

use num_complex::Complex64;

/// Dense complex matrix used throughout.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<Complex64>;
/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type RVec = nalgebra::DVector<f64>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("trace is not 1 (got {trace:.12e})")]
    NotUnitTrace { trace: f64 },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("Kraus operators are not complete (residual {residual:.3e})")]
    IncompleteKraus { residual: f64 },
    #[error("conditional state undefined: outcome {outcome} has probability {prob:.3e}")]
    ZeroProbabilityOutcome { outcome: usize, prob: f64 },
    #[error("state is rank deficient (min eigenvalue {min_eig:.3e}); RLD needs full rank")]
    RankDeficientState { min_eig: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("retrieval undefined: target direction lies outside the family support")]
    NoRetrieval,
    #[error("optimal scheme construction failed: no root of the constraint ({detail})")]
    ConstructionFailed { detail: String },
    #[error("parameter out of range: {0}")]
    ParameterError(String),
    #[error("experiment undefined: the Cramer-Rao quadratic form is infinite")]
    ExperimentUndefined,
    #[error("all outcome counts are zero")]
    AllZeroCounts,
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand complex constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
