//! Solver library for the time-dependent radiative transport equation in
//! isotropic media on the unit square.
//!
//! The angular average `<u>(t, x)` of the transport solution satisfies a
//! retarded-time volume integral equation: the value at `(t, x)` is an
//! integral of `sigma_s <u> + f` over the backward light cone, weighted by
//! the attenuation `E(x, y)` and the weakly singular geometric factor
//! `1 / |x - y|`. This crate discretizes that equation with piecewise-linear
//! hat functions in time and piecewise-constant collocation in space, and
//! marches the resulting explicit system forward in time.
//!
//! Two right-hand-side evaluators are provided:
//!
//! * [`direct::solve`] — exact `O(M^2)`-per-step summation over all
//!   collocation pairs (the reference path),
//! * [`treecode::solve_treecode`] — a kd-tree particle–cluster treecode with
//!   tensor-product Chebyshev moments that compresses far-field sources and
//!   brings the per-step cost down to `O(M log M)`.
//!
//! The [`analysis`] module supplies error metrics, nested-grid self-convergence
//! machinery, and reconstruction of the directional solution from the angular
//! average.

pub mod analysis;
pub mod direct;
pub mod error;
pub mod geom;
pub mod grid;
pub mod history;
pub mod kernel;
pub mod medium;
pub mod treecode;

pub use analysis::{
    convergence_study, directional_solution, fit_loglog_slope, omega, relative_l2,
    restrict_final_to_coarse, restrict_vector, ConvergenceConfig, ConvergenceRow,
    ConvergenceStudy, ErrorReport, SolverChoice,
};
pub use direct::{active_lags, solve, ActiveLag, LagSet, SameLevelMode, SolverOptions};
pub use error::{Result, RteError};
pub use geom::Point;
pub use grid::{build_time_grid, build_uniform_grid, ray_exit_distance, CollocationGrid, TimeGrid};
pub use history::{SolutionHistory, SolveResult, SolveStats};
pub use kernel::{
    cell_weight, f_aux, geometric_cell_integral, hat, CellWeightTable, UNIT_SPHERE_MEASURE_2D,
};
pub use medium::{
    load_medium_csv, validate_assumptions, AssumptionReport, MediumModel, ScalarField, SourceModel,
};
pub use treecode::{
    build_tree, chebyshev_nodes, evaluate_rhs, interp_weight, solve_treecode, upward_pass,
    ChebyshevPlan, ClusterTree, MomentRing, Partition, TreecodeParams,
};
