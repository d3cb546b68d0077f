//! Lyapunov–Schmidt frames, fibers, heights and fold apexes.

mod engine;
mod frame;

pub use engine::{ApexData, ApexResult, FiberOptions, FiberPoint, FiberStats, FoldProblem};
pub use frame::{build_frame, LsFrame, GAMMA_SEPARATION, SIMPLICITY_TOL};
