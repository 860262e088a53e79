//! Preparation/measurement probability calculus for finite-dimensional
//! quantum systems.
//!
//! Preparation devices are described by non-negative-definite operators
//! `Λ_i`, measurement devices by `Γ_j`, and every predictive or retrodictive
//! probability follows from `P(i,j) = Tr(Λ_i Γ_j) / Tr(Λ Γ)`.

// `!(x > tol)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod error;
pub mod evolution;
pub mod io;
pub mod operator;
pub mod probability;
pub mod random;
pub mod scenarios;
pub mod sim;

pub use device::{BiasReport, DensityOperator, DeviceOperatorSet, Pom, Role};
pub use error::{Error, Result};
pub use evolution::EvolutionContext;
pub use operator::{ComplexScalar, HermitianOperator, SquareMatrix, Tolerances, UnitaryMap};
pub use probability::{ConditionalTable, GivenAxis, JointDistribution};
