//! Joint recovery of row-sparse signal matrices and unknown measurement row
//! permutations (unlabeled sensing) with sparse Bayesian learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the multiple-measurement-vector problem and its synthetic
//!   generator.
//! * [`permutation`] solves `max_P yᵀ P v` over permutations by sorting, with
//!   anchor constraints and shared-permutation candidate selection.
//! * [`pmsbl`] is the EM solver for independent columns.
//! * [`pksbl`] is the EM solver for AR(1)-correlated columns, whose E-step is a
//!   Kalman filter followed by an RTS smoother.
//! * [`somp`] is the simultaneous OMP baseline.
//! * [`harness`] runs seeded Monte Carlo trials and sweeps and writes CSV.
//! * [`io`] is the JSON instance format shared with the command line tool.

pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod permutation;
pub mod pksbl;
pub mod pmsbl;
pub mod somp;

pub use error::{Error, Result};
pub use model::{
    gen_problem, sigma_from_snr, MeasurementMatrix, NoiseModel, PermutationMap, ProblemConfig,
    ProblemInstance, SignalMatrix,
};
pub use permutation::PartialMap;
