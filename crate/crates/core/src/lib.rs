//! Solver library for second- and first-order mean-field games.
//!
//! The discrete system couples a backward Hamilton-Jacobi-Bellman equation
//! with a forward Fokker-Planck equation through interaction and terminal
//! costs. Fictitious play decouples it: each outer iteration solves the HJB
//! backward with Newton's method against the frozen density, pushes the
//! density forward through the semi-implicit Fokker-Planck scheme, and
//! averages. The gain of the best response (exploitability) drives the
//! stopping rule; a backtracking line search can pick the averaging weight,
//! and a coarse-to-fine grid hierarchy provides initialization and vanishing
//! numerical viscosity for first-order problems.

pub mod catalog;
pub mod error;
pub mod fp;
pub mod grid;
pub mod hjb;
pub mod linsolve;
pub mod ops;
pub mod play;
pub mod problem;

pub use error::{GridError, ProblemError, SolveError, SolverError};
pub use grid::{grid_distance, grid_norm, inner_product, prolongate, GridSpec, ScalarField};
pub use hjb::NewtonOptions;
pub use play::{
    run_fictitious_play, run_hierarchical, HierarchySpec, Init, IterationRecord, PlayState,
    RunResult, WeightSchedule,
};
pub use problem::ProblemSpec;
