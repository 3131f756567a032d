//! Hat basis in time and the weakly singular cell weights in space.
//!
//! The retarded-time scheme couples collocation points through
//!
//! ```text
//! W(x_p, x_q) = E(x_p, x_q) * int_{T_q} |x_p - z|^{-1} dz
//! ```
//!
//! where the geometric integral over a square cell of side `ell` centered at
//! `y` has the closed form
//!
//! ```text
//! int_{T(y)} |x - z|^{-1} dz = sum_{i,j in {-1,0,1}} i j F(t1 + i ell/2, t2 + j ell/2),
//! t = y - x,
//! F(r, s) = sgn(r) sgn(s) ( |r| log(|s| + rho) + |s| log(|r| + rho)
//!                           - |r| log|r| - |s| log|s| ),   rho = sqrt(r^2 + s^2),
//! ```
//!
//! with the convention `0 * log 0 = 0`. On a uniform grid the geometric
//! factor depends only on the integer cell offset, so a table of `O(M)`
//! entries serves all `M^2` pairs.

use crate::geom::Point;
use crate::grid::CollocationGrid;
use crate::medium::MediumModel;

/// Surface measure of the unit sphere in 2D (circumference of the unit
/// circle), the normalization constant of the angular average.
pub const UNIT_SPHERE_MEASURE_2D: f64 = std::f64::consts::TAU;

/// Standard hat function: `1 - t` on `[0, 1]`, `1 + t` on `[-1, 0)`, zero
/// outside; `V(-1) = V(1) = 0`.
#[inline]
pub fn hat(t: f64) -> f64 {
    if (0.0..=1.0).contains(&t) {
        1.0 - t
    } else if (-1.0..0.0).contains(&t) {
        1.0 + t
    } else {
        0.0
    }
}

/// The corner antiderivative `F(r, s)` of `|z|^{-1}` over axis-aligned
/// rectangles, finite everywhere under the `0 * log 0 = 0` convention.
#[inline]
pub fn f_aux(r: f64, s: f64) -> f64 {
    let ar = r.abs();
    let as_ = s.abs();
    // F -> 0 continuously as either argument vanishes; branching here also
    // avoids IEEE 0 * (-inf) = NaN from the log|r| terms.
    if ar < 1e-300 || as_ < 1e-300 {
        return 0.0;
    }
    let rho = (r * r + s * s).sqrt();
    let sign = if (r < 0.0) != (s < 0.0) { -1.0 } else { 1.0 };
    sign * (ar * ((as_ + rho) / ar).ln() + as_ * ((ar + rho) / as_).ln())
}

/// Exact integral of `|x - z|^{-1}` over the square cell of side `ell`
/// centered at `y_center`, via the signed `F` combination.
#[inline]
pub fn geometric_cell_integral(x: Point, y_center: Point, ell: f64) -> f64 {
    let t1 = y_center[0] - x[0];
    let t2 = y_center[1] - x[1];
    let half = 0.5 * ell;
    let mut sum = 0.0;
    for i in [-1.0f64, 1.0] {
        for j in [-1.0f64, 1.0] {
            sum += i * j * f_aux(t1 + i * half, t2 + j * half);
        }
    }
    sum
}

/// Weakly singular cell weight `W(x_p, x_q)`: attenuation times the exact
/// geometric cell integral.
#[inline]
pub fn cell_weight(x_p: Point, x_q: Point, ell: f64, medium: &MediumModel) -> f64 {
    medium.attenuation(x_p, x_q) * geometric_cell_integral(x_p, x_q, ell)
}

/// Table of geometric cell integrals indexed by integer cell offset.
///
/// The integral is translation invariant on a uniform grid and symmetric
/// under sign flips and axis swap of the offset, so only offsets with
/// `0 <= di, dj < m` are stored.
#[derive(Debug, Clone)]
pub struct CellWeightTable {
    cell_size: f64,
    points_per_side: usize,
    values: Vec<f64>,
}

impl CellWeightTable {
    /// Precomputes the geometric factors for all cell offsets of `grid`.
    pub fn build(grid: &CollocationGrid) -> Self {
        let m = grid.points_per_side();
        let ell = grid.cell_size();
        let mut values = Vec::with_capacity(m * m);
        for dj in 0..m {
            for di in 0..m {
                values.push(geometric_cell_integral(
                    [0.0, 0.0],
                    [di as f64 * ell, dj as f64 * ell],
                    ell,
                ));
            }
        }
        CellWeightTable {
            cell_size: ell,
            points_per_side: m,
            values,
        }
    }

    /// Geometric factor for the signed cell offset `(di, dj)`.
    #[inline]
    pub fn get(&self, di: isize, dj: isize) -> f64 {
        let di = di.unsigned_abs();
        let dj = dj.unsigned_abs();
        debug_assert!(di < self.points_per_side && dj < self.points_per_side);
        self.values[dj * self.points_per_side + di]
    }

    /// Self-cell entry `4 ell ln(1 + sqrt 2)`.
    #[inline]
    pub fn self_entry(&self) -> f64 {
        self.values[0]
    }

    #[inline]
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;
    use crate::medium::MediumModel;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn hat_examples() {
        assert_eq!(hat(0.0), 1.0);
        assert_eq!(hat(0.5), 0.5);
        assert_eq!(hat(-0.5), 0.5);
        assert_eq!(hat(1.2), 0.0);
        assert_eq!(hat(1.0), 0.0);
        assert_eq!(hat(-1.0), 0.0);
    }

    #[test]
    fn hat_partition_of_unity() {
        for step in 0..200 {
            let t = -3.0 + 6.0 * step as f64 / 199.0;
            let sum: f64 = (-5..=5).map(|k| hat(t + k as f64)).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn f_aux_examples() {
        assert_eq!(f_aux(0.7, 0.0), 0.0);
        assert_eq!(f_aux(0.0, -1.3), 0.0);
        let lns = (1.0 + std::f64::consts::SQRT_2).ln();
        assert_relative_eq!(f_aux(0.5, 0.5), lns, max_relative = 1e-14);
        for (r, s) in [(0.3, 0.8), (1.2, 0.05), (0.9, 0.9)] {
            assert_relative_eq!(f_aux(-r, s), -f_aux(r, s), max_relative = 1e-14);
            assert_relative_eq!(f_aux(r, -s), -f_aux(r, s), max_relative = 1e-14);
            assert_relative_eq!(f_aux(-r, -s), f_aux(r, s), max_relative = 1e-14);
        }
    }

    #[test]
    fn self_cell_integral_closed_form() {
        let ell = 0.1;
        let expect = 4.0 * ell * (1.0 + std::f64::consts::SQRT_2).ln();
        let got = geometric_cell_integral([0.3, 0.4], [0.3, 0.4], ell);
        assert_relative_eq!(got, expect, max_relative = 1e-13);
        assert_abs_diff_eq!(got, 0.352549, epsilon = 1e-6);
    }

    #[test]
    fn far_cell_integral_approaches_midpoint_rule() {
        let ell = 0.02;
        let x = [0.1, 0.1];
        let y = [0.1 + 10.0 * ell, 0.1];
        let exact = geometric_cell_integral(x, y, ell);
        let midpoint = ell * ell / (10.0 * ell);
        assert_relative_eq!(exact, midpoint, max_relative = 5e-3);
    }

    #[test]
    fn cell_integral_is_symmetric_in_the_offset() {
        let ell = 0.05;
        for (t1, t2) in [(0.12, 0.31), (0.0, 0.2), (0.07, 0.07)] {
            let a = geometric_cell_integral([0.0, 0.0], [t1, t2], ell);
            let b = geometric_cell_integral([0.0, 0.0], [t2, t1], ell);
            assert_relative_eq!(a, b, max_relative = 1e-13);
            let c = geometric_cell_integral([0.0, 0.0], [-t1, t2], ell);
            assert_relative_eq!(a, c, max_relative = 1e-13);
        }
    }

    #[test]
    fn table_matches_direct_evaluation_and_is_positive() {
        let grid = build_uniform_grid(1.0 / 12.0).unwrap();
        let table = CellWeightTable::build(&grid);
        let expect_self = 4.0 * grid.cell_size() * (1.0 + std::f64::consts::SQRT_2).ln();
        assert_relative_eq!(table.self_entry(), expect_self, max_relative = 1e-10);
        for dj in -5isize..=5 {
            for di in -5isize..=5 {
                let v = table.get(di, dj);
                assert!(v.is_finite() && v > 0.0);
                let direct = geometric_cell_integral(
                    [0.5, 0.5],
                    [
                        0.5 + di as f64 * grid.cell_size(),
                        0.5 + dj as f64 * grid.cell_size(),
                    ],
                    grid.cell_size(),
                );
                assert_relative_eq!(v, direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn cell_weight_factors_attenuation_times_geometry() {
        let grid = build_uniform_grid(1.0 / 48.0).unwrap();
        let ell = grid.cell_size();
        let med = MediumModel::constant(5.2, 5.0, &grid).unwrap();

        // E(x, x) = 1, so the self weight is the bare geometric factor.
        let w = cell_weight([0.25, 0.25], [0.25, 0.25], ell, &med);
        assert_relative_eq!(
            w,
            4.0 * ell * (1.0 + std::f64::consts::SQRT_2).ln(),
            max_relative = 1e-10
        );
        let x = [0.25, 0.5];
        let y = [0.75, 0.5];
        let w = cell_weight(x, y, ell, &med);
        let expect = (-2.6f64).exp() * geometric_cell_integral(x, y, ell);
        assert_relative_eq!(w, expect, max_relative = 1e-14);
        assert!(w > 0.0);
    }

    /// Discrete contraction bound: the attenuated row sums stay below one
    /// for the benchmark medium at every tested resolution.
    #[test]
    fn contraction_row_sums_below_one() {
        for m in [24usize, 48, 80] {
            let grid = build_uniform_grid(1.0 / m as f64).unwrap();
            let med = MediumModel::constant(5.2, 5.0, &grid).unwrap();
            let table = CellWeightTable::build(&grid);
            let pts = grid.points();
            let mut worst = 0.0f64;
            for p in 0..grid.num_points() {
                let (ip, jp) = grid.cell_coords(p);
                let mut row = 0.0;
                for q in 0..grid.num_points() {
                    let (iq, jq) = grid.cell_coords(q);
                    let w = med.attenuation(pts[p], pts[q])
                        * table.get(ip as isize - iq as isize, jp as isize - jq as isize);
                    row += w * med.sigma_s(pts[q]);
                }
                worst = worst.max(row / UNIT_SPHERE_MEASURE_2D);
            }
            assert!(worst < 1.0, "row bound {worst} >= 1 at m = {m}");
        }
    }
}
