//! Shared fixtures for the solver benchmarks.

use rte_core::{
    build_time_grid, build_uniform_grid, CollocationGrid, MediumModel, SourceModel, TimeGrid,
};

/// The standard benchmark configuration on an `m x m` grid with `h = ell`.
pub struct BenchSetup {
    pub grid: CollocationGrid,
    pub time_grid: TimeGrid,
    pub medium: MediumModel,
    pub source: SourceModel,
}

/// Benchmark medium (`sigma_t = 5.2`, `sigma_s = 5.0`) and the traveling
/// Gaussian source.
pub fn benchmark_setup(points_per_side: usize) -> BenchSetup {
    let grid = build_uniform_grid(1.0 / points_per_side as f64).expect("valid grid");
    let time_grid = build_time_grid(1.0, grid.cell_size()).expect("valid time grid");
    let medium = MediumModel::constant(5.2, 5.0, &grid).expect("valid medium");
    BenchSetup {
        grid,
        time_grid,
        medium,
        source: SourceModel::Benchmark,
    }
}
