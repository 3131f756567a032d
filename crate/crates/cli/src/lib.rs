//! Experiment harness around the transport solver: configuration, run
//! drivers, and CSV output.
//!
//! Runs are described by a flat `key = value` config file plus command-line
//! overrides; see [`config::RunConfig`] for the knobs. Three drivers cover
//! the standard workflows: a single solve with a solution dump
//! ([`drivers::run_single`]), a timing/accuracy sweep of the treecode
//! against the direct solver ([`drivers::run_experiment_one`]), and a
//! nested-grid self-convergence study ([`drivers::run_experiment_two`]).

pub mod config;
pub mod csvio;
pub mod drivers;

pub use config::{CliError, MediumSpec, RawConfig, RunConfig, SolverMode, SourceSpec};
pub use drivers::{
    run_experiment_one, run_experiment_two, run_single, run_validate, Exp1Row, Exp2Series,
    SingleOutcome,
};
