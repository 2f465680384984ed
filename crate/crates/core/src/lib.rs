//! Joint estimation of regression coefficients and concomitant scale
//! parameters by minimizing sums of perspective functions with a
//! Douglas-Rachford splitting algorithm.

pub mod cli;
pub mod convex;
pub mod experiments;
pub mod io;
pub mod model;
pub mod persp;
pub mod solver;

pub use convex::{ConvexError, ScaleCoupling, SeparablePenalty};
pub use model::{
    assemble_stacked, build_model, evaluate_objective, validate_spec, DataBlock, ModelError,
    ModelParams, PenaltyBlock, PenaltyOp, ProblemSpec, StackedProblem,
};
pub use persp::{AtomError, AtomKind, PerspectiveAtom, ProxResult};
pub use cli::run_cli;
pub use solver::{solve, Solution, SolverError, SolverOptions, SolverState};
