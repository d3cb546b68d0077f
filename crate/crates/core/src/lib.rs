//! Global-fold certification and exact solution counting for
//! `F(u) = Tu - P(u) = g` on finite-dimensional discretizations.

pub mod error;
pub mod fiber;
pub mod linalg;
mod map;
pub mod models;
pub mod operators;
pub mod oracle;
pub mod perturbations;
pub mod solver;

pub use error::{FoldError, Result};
pub use fiber::{build_frame, ApexData, ApexResult, FiberOptions, FiberPoint, FoldProblem, LsFrame};
pub use map::FoldMap;
pub use operators::{spectral_decompose, AmenabilityKind, AmenabilityReport, Operator, SpectralData};
pub use perturbations::{CompatibilityKind, CompatibilityReport, Perturbation, SamplingPlan, ScalarNonlinearity};
pub use solver::{classify, solve, trace_fold, Classification, SolutionSet};
