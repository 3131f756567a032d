//! Spatial and temporal discretization of `[0,1]^2 x [0,T]`.
//!
//! Space is partitioned into `m x m` uniform square cells of side `ell`,
//! with one collocation point per cell at the cell centroid
//! `x_p = ((i + 1/2) ell, (j + 1/2) ell)`. Points are ordered row-major,
//! `p = j * m + i`, so solution vectors are bit-for-bit comparable across
//! runs. Time is an equispaced subdivision `t_l = l * h` of `[0, T]`; nodes
//! are always computed as `l * h` rather than accumulated, so there is no
//! drift over long marches.

use crate::error::{Result, RteError};
use crate::geom::Point;

/// How a cell relates to the domain boundary.
///
/// On the unit square every uniform cell is interior, so `Clipped` is never
/// produced here; the variant exists so downstream code can carry the
/// distinction for domains whose boundary cells must be clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Interior,
    Clipped,
}

/// Uniform-cell partition of the unit square with centroid collocation
/// points.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    cell_size: f64,
    points_per_side: usize,
    points: Vec<Point>,
}

impl CollocationGrid {
    /// Cell side length `ell`.
    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Number of cells per side, `m = 1 / ell`.
    #[inline]
    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    /// Total number of collocation points, `M = m^2`.
    #[inline]
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Cell area `ell^2`.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// All collocation points in row-major order.
    #[inline]
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Collocation point `x_p`.
    #[inline]
    pub fn point(&self, p: usize) -> Point {
        self.points[p]
    }

    /// Flat index of the cell at column `i`, row `j`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.points_per_side && j < self.points_per_side);
        j * self.points_per_side + i
    }

    /// Column/row pair of the flat index `p`.
    #[inline]
    pub fn cell_coords(&self, p: usize) -> (usize, usize) {
        (p % self.points_per_side, p / self.points_per_side)
    }

    /// Index of the cell containing `x` (clamped to the grid at the
    /// boundary, where a point may sit on a cell edge).
    #[inline]
    pub fn cell_of(&self, x: Point) -> usize {
        let m = self.points_per_side;
        let i = ((x[0] / self.cell_size) as isize).clamp(0, m as isize - 1) as usize;
        let j = ((x[1] / self.cell_size) as isize).clamp(0, m as isize - 1) as usize;
        self.index(i, j)
    }

    /// Boundary classification of cell `p`. Always `Interior` on the unit
    /// square.
    #[inline]
    pub fn cell_kind(&self, _p: usize) -> CellKind {
        CellKind::Interior
    }
}

/// Builds the uniform collocation grid with cell side `cell_size`.
///
/// Requires `0 < cell_size <= 1/2` and `1 / cell_size` integral to within
/// `1e-9`; otherwise the error names the nearest valid cell size.
pub fn build_uniform_grid(cell_size: f64) -> Result<CollocationGrid> {
    if !cell_size.is_finite() || cell_size <= 0.0 {
        return Err(RteError::InvalidGrid(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    if cell_size > 0.5 {
        return Err(RteError::InvalidGrid(format!(
            "cell size {cell_size} exceeds 1/2; at least two cells per side are required"
        )));
    }
    let inv = 1.0 / cell_size;
    let m = inv.round();
    if (inv - m).abs() > 1e-9 {
        return Err(RteError::InvalidGrid(format!(
            "1/cell_size = {inv} is not an integer; nearest valid cell size is 1/{}",
            m as usize
        )));
    }
    let m = m as usize;
    let ell = cell_size;
    let mut points = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            points.push([(i as f64 + 0.5) * ell, (j as f64 + 0.5) * ell]);
        }
    }
    Ok(CollocationGrid {
        cell_size: ell,
        points_per_side: m,
        points,
    })
}

/// Equispaced subdivision of `[0, T]` with nodes `t_l = l * h`.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    horizon: f64,
    step: f64,
    num_steps: usize,
}

impl TimeGrid {
    /// Final time `T`.
    #[inline]
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Step `h`.
    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps `N = T / h`; the grid carries `N + 1` nodes.
    #[inline]
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Node `t_l = l * h`.
    #[inline]
    pub fn node(&self, l: usize) -> f64 {
        l as f64 * self.step
    }
}

/// Builds the time grid for horizon `T` and step `h`; `T / h` must be
/// integral to within `1e-9`.
pub fn build_time_grid(horizon: f64, step: f64) -> Result<TimeGrid> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(RteError::InvalidTimeGrid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(RteError::InvalidTimeGrid(format!(
            "step must be positive, got {step}"
        )));
    }
    let ratio = horizon / step;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(RteError::InvalidTimeGrid(format!(
            "horizon/step = {ratio} is not an integer"
        )));
    }
    Ok(TimeGrid {
        horizon,
        step,
        num_steps: n as usize,
    })
}

/// Distance from `x` to the boundary of the unit square along `-v`.
///
/// Returns `sup {{ r : x - r' v stays inside for 0 <= r' < r }}`, computed by
/// slab clipping against the four faces. A start point on the boundary is
/// already at distance zero regardless of direction. `v` must be a unit
/// vector to within `1e-12`; `x` must lie in the closed square.
pub fn ray_exit_distance(x: Point, v: Point) -> Result<f64> {
    if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
        return Err(RteError::OutsideDomain(format!(
            "({}, {}) is outside [0,1]^2",
            x[0], x[1]
        )));
    }
    let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if (speed - 1.0).abs() > 1e-12 {
        return Err(RteError::InvalidArgument(format!(
            "direction must be a unit vector, |v| = {speed}"
        )));
    }
    if x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0 {
        return Ok(0.0);
    }
    // The path r -> x - r v leaves the slab 0 <= x_i - r v_i <= 1 at
    // r = x_i / v_i (v_i > 0) or r = (x_i - 1) / v_i (v_i < 0).
    let mut t = f64::INFINITY;
    for axis in 0..2 {
        if v[axis] > 0.0 {
            t = t.min(x[axis] / v[axis]);
        } else if v[axis] < 0.0 {
            t = t.min((x[axis] - 1.0) / v[axis]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_by_two_grid_has_expected_centroids() {
        let g = build_uniform_grid(0.5).unwrap();
        assert_eq!(g.num_points(), 4);
        let expect = [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]];
        for (p, e) in g.points().iter().zip(expect.iter()) {
            assert_eq!(p, e);
        }
        assert_eq!(g.cell_kind(0), CellKind::Interior);
    }

    #[test]
    fn point_counts_match_cell_size() {
        assert_eq!(build_uniform_grid(1.0 / 48.0).unwrap().num_points(), 2304);
        assert_eq!(build_uniform_grid(1.0 / 24.0).unwrap().num_points(), 576);
    }

    #[test]
    fn cells_tile_the_unit_square() {
        for m in [2usize, 7, 24, 48] {
            let g = build_uniform_grid(1.0 / m as f64).unwrap();
            let covered = g.num_points() as f64 * g.cell_area();
            assert_abs_diff_eq!(covered, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn distinct_points_are_at_least_one_cell_apart() {
        let g = build_uniform_grid(1.0 / 6.0).unwrap();
        let ell = g.cell_size();
        for p in 0..g.num_points() {
            for q in (p + 1)..g.num_points() {
                let d = crate::geom::dist(g.point(p), g.point(q));
                assert!(d >= ell - 1e-12, "|x_{p} - x_{q}| = {d} < {ell}");
            }
        }
    }

    #[test]
    fn rejects_bad_cell_sizes() {
        assert!(build_uniform_grid(0.0).is_err());
        assert!(build_uniform_grid(-0.1).is_err());
        assert!(build_uniform_grid(0.6).is_err());
        let err = build_uniform_grid(0.3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1/3"), "message should name nearest size: {msg}");
    }

    #[test]
    fn row_major_index_round_trip() {
        let g = build_uniform_grid(0.25).unwrap();
        for p in 0..g.num_points() {
            let (i, j) = g.cell_coords(p);
            assert_eq!(g.index(i, j), p);
            assert_eq!(g.cell_of(g.point(p)), p);
        }
    }

    #[test]
    fn time_grid_examples() {
        let t = build_time_grid(1.0, 1.0 / 48.0).unwrap();
        assert_eq!(t.num_steps(), 48);
        assert_eq!(t.node(48), 1.0);
        let t = build_time_grid(1.0, 1.0).unwrap();
        assert_eq!(t.num_steps(), 1);
        assert_eq!(t.node(0), 0.0);
        assert!(build_time_grid(1.0, 0.3).is_err());
        assert!(build_time_grid(-1.0, 0.5).is_err());
    }

    #[test]
    fn time_nodes_are_exactly_multiples_of_the_step() {
        let t = build_time_grid(2.0, 1.0 / 7.0).unwrap();
        for l in 0..=t.num_steps() {
            assert_eq!(t.node(l), l as f64 * t.step());
        }
    }

    #[test]
    fn exit_distance_examples() {
        let d = ray_exit_distance([0.5, 0.5], [1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = ray_exit_distance([0.5, 0.5], [s, s]).unwrap();
        assert_abs_diff_eq!(d, s, epsilon = 1e-12);
        let d = ray_exit_distance([0.0, 0.5], [-1.0, 0.0]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn exit_distance_rejects_bad_input() {
        assert!(ray_exit_distance([1.5, 0.5], [1.0, 0.0]).is_err());
        assert!(ray_exit_distance([0.5, 0.5], [1.0, 1.0]).is_err());
    }

    /// Clips the full line x + t v against the unit square; returns the
    /// chord length through x. Independent of the slab logic under test.
    fn chord_length(x: Point, v: Point) -> f64 {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for axis in 0..2 {
            if v[axis] == 0.0 {
                continue;
            }
            let a = (0.0 - x[axis]) / v[axis];
            let b = (1.0 - x[axis]) / v[axis];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (hi - lo).max(0.0)
    }

    #[test]
    fn forward_and_backward_exits_sum_to_the_chord() {
        let dirs = 16usize;
        for xi in 1..5 {
            for yi in 1..5 {
                let x = [xi as f64 / 5.0, yi as f64 / 5.0];
                for k in 0..dirs {
                    let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / dirs as f64;
                    let v = [a.cos(), a.sin()];
                    let fwd = ray_exit_distance(x, v).unwrap();
                    let bwd = ray_exit_distance(x, [-v[0], -v[1]]).unwrap();
                    assert_abs_diff_eq!(fwd + bwd, chord_length(x, v), epsilon = 1e-12);
                    assert!(fwd <= std::f64::consts::SQRT_2 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn odd_refinement_maps_coarse_centroids_onto_fine_centroids() {
        let coarse = build_uniform_grid(1.0 / 24.0).unwrap();
        for k in 2..=4usize {
            let ratio = 2 * k - 1;
            let fine = build_uniform_grid(1.0 / (24.0 * ratio as f64)).unwrap();
            for i in 0..coarse.points_per_side() {
                let fi = ratio * i + (ratio - 1) / 2;
                let xc = coarse.point(coarse.index(i, 0))[0];
                let xf = fine.point(fine.index(fi, 0))[0];
                assert_abs_diff_eq!(xc, xf, epsilon = 1e-14);
            }
        }
    }
}
