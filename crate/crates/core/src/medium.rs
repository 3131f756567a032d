//! Optical coefficients, isotropic sources, and segment attenuation.
//!
//! A medium is described by the total coefficient `sigma_t > 0` and the
//! scattering coefficient `0 <= sigma_s <= sigma_t`. Well-posedness of the
//! integral formulation requires the contraction bound
//! `k0 = sup sigma_s / sigma_t < 1`, which is checked over the collocation
//! points at construction. The attenuation factor between two points is
//! `E(x, y) = exp(-int_0^|x-y| sigma_t along the segment)`; for constant
//! coefficients it reduces to `exp(-sigma_t |x - y|)`, otherwise the line
//! integral is evaluated by a composite trapezoid rule with step `ell / 2`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, RteError};
use crate::geom::{dist, Point};
use crate::grid::CollocationGrid;

/// A scalar coefficient field on the unit square.
#[derive(Clone)]
pub enum ScalarField {
    /// Spatially constant value.
    Constant(f64),
    /// Samples at the collocation points of a uniform grid, interpolated
    /// bilinearly between cell centroids and extended constantly outside
    /// the centroid hull.
    Grid {
        points_per_side: usize,
        cell_size: f64,
        values: Arc<Vec<f64>>,
    },
    /// Arbitrary callable field.
    Analytic(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Grid {
                points_per_side, ..
            } => write!(f, "Grid({points_per_side}x{points_per_side})"),
            ScalarField::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

impl ScalarField {
    /// Builds a grid-sampled field from centroid values in row-major order.
    pub fn from_grid_samples(grid: &CollocationGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(RteError::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.num_points(),
                values.len()
            )));
        }
        Ok(ScalarField::Grid {
            points_per_side: grid.points_per_side(),
            cell_size: grid.cell_size(),
            values: Arc::new(values),
        })
    }

    /// Evaluates the field at `x`.
    pub fn eval(&self, x: Point) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Grid {
                points_per_side,
                cell_size,
                values,
            } => {
                let m = *points_per_side;
                // Bilinear between centroids; clamp to the centroid hull.
                let u = (x[0] / cell_size - 0.5).clamp(0.0, (m - 1) as f64);
                let v = (x[1] / cell_size - 0.5).clamp(0.0, (m - 1) as f64);
                let i0 = (u as usize).min(m - 2);
                let j0 = (v as usize).min(m - 2);
                let fu = u - i0 as f64;
                let fv = v - j0 as f64;
                let at = |i: usize, j: usize| values[j * m + i];
                let bottom = at(i0, j0) * (1.0 - fu) + at(i0 + 1, j0) * fu;
                let top = at(i0, j0 + 1) * (1.0 - fu) + at(i0 + 1, j0 + 1) * fu;
                bottom * (1.0 - fv) + top * fv
            }
            ScalarField::Analytic(f) => f(x),
        }
    }

    /// The field's value when it is spatially constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(c) => Some(*c),
            _ => None,
        }
    }

    fn constant_value(&self) -> Option<f64> {
        self.as_constant()
    }
}

/// Summary of the coefficient checks over the collocation points.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// `sup sigma_s / sigma_t` over the collocation points.
    pub k0: f64,
    /// Bounds of `sigma_s` over the collocation points.
    pub sigma_s_min: f64,
    pub sigma_s_max: f64,
    /// Minimum of `sigma_t` over the collocation points.
    pub sigma_t_min: f64,
    pub pass: bool,
    /// Description of the first violation, if any.
    pub failure: Option<String>,
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k0 = sup sigma_s/sigma_t = {:.12}", self.k0)?;
        writeln!(
            f,
            "sigma_s in [{:.6}, {:.6}], min sigma_t = {:.6}",
            self.sigma_s_min, self.sigma_s_max, self.sigma_t_min
        )?;
        match (&self.pass, &self.failure) {
            (true, _) => write!(f, "PASS"),
            (false, Some(why)) => write!(f, "FAIL: {why}"),
            (false, None) => write!(f, "FAIL"),
        }
    }
}

/// Checks the coefficient bounds over all collocation points of `grid`.
///
/// Fails if any sample is non-finite, `sigma_t <= 0`, `sigma_s < 0`, or the
/// contraction constant `k0 >= 1`.
pub fn validate_assumptions(
    sigma_t: &ScalarField,
    sigma_s: &ScalarField,
    grid: &CollocationGrid,
) -> AssumptionReport {
    let mut k0 = 0.0f64;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    let mut t_min = f64::INFINITY;
    let mut failure: Option<String> = None;

    for (p, &x) in grid.points().iter().enumerate() {
        let st = sigma_t.eval(x);
        let ss = sigma_s.eval(x);
        if !st.is_finite() || !ss.is_finite() {
            failure.get_or_insert(format!(
                "non-finite coefficient at point {p} ({}, {})",
                x[0], x[1]
            ));
            continue;
        }
        s_min = s_min.min(ss);
        s_max = s_max.max(ss);
        t_min = t_min.min(st);
        if st <= 0.0 {
            failure.get_or_insert(format!("sigma_t = {st} <= 0 at point {p}"));
            continue;
        }
        if ss < 0.0 {
            failure.get_or_insert(format!("sigma_s = {ss} < 0 at point {p}"));
            continue;
        }
        k0 = k0.max(ss / st);
    }
    if failure.is_none() && k0 >= 1.0 {
        failure = Some(format!("k0 = {k0} >= 1: scattering dominates absorption"));
    }
    AssumptionReport {
        k0,
        sigma_s_min: s_min,
        sigma_s_max: s_max,
        sigma_t_min: t_min,
        pass: failure.is_none(),
        failure,
    }
}

/// Optical coefficients of the medium, validated against a collocation grid.
#[derive(Debug, Clone)]
pub struct MediumModel {
    sigma_t: ScalarField,
    sigma_s: ScalarField,
    k0: f64,
    sigma_s_bounds: (f64, f64),
    /// Quadrature step for variable-coefficient line integrals (`ell / 2`).
    path_step: f64,
    /// Optional dense cache of `E(x_p, x_q)` over all collocation pairs.
    pair_cache: Option<Arc<Vec<f64>>>,
    num_points: usize,
}

impl MediumModel {
    /// Builds a medium and rejects it if the coefficient checks fail.
    pub fn new(
        sigma_t: ScalarField,
        sigma_s: ScalarField,
        grid: &CollocationGrid,
    ) -> Result<Self> {
        let report = validate_assumptions(&sigma_t, &sigma_s, grid);
        if !report.pass {
            return Err(RteError::AssumptionViolated(
                report.failure.unwrap_or_else(|| "coefficient check failed".into()),
            ));
        }
        Ok(MediumModel {
            sigma_t,
            sigma_s,
            k0: report.k0,
            sigma_s_bounds: (report.sigma_s_min, report.sigma_s_max),
            path_step: grid.cell_size() / 2.0,
            pair_cache: None,
            num_points: grid.num_points(),
        })
    }

    /// Constant-coefficient medium.
    pub fn constant(sigma_t: f64, sigma_s: f64, grid: &CollocationGrid) -> Result<Self> {
        MediumModel::new(
            ScalarField::Constant(sigma_t),
            ScalarField::Constant(sigma_s),
            grid,
        )
    }

    /// Contraction constant `k0 = sup sigma_s / sigma_t`.
    #[inline]
    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Bounds of `sigma_s` over the collocation points.
    #[inline]
    pub fn sigma_s_bounds(&self) -> (f64, f64) {
        self.sigma_s_bounds
    }

    #[inline]
    pub fn sigma_t(&self, x: Point) -> f64 {
        self.sigma_t.eval(x)
    }

    #[inline]
    pub fn sigma_s(&self, x: Point) -> f64 {
        self.sigma_s.eval(x)
    }

    #[inline]
    pub fn sigma_t_field(&self) -> &ScalarField {
        &self.sigma_t
    }

    #[inline]
    pub fn sigma_s_field(&self) -> &ScalarField {
        &self.sigma_s
    }

    /// Re-runs the coefficient checks against `grid`.
    pub fn assumption_report(&self, grid: &CollocationGrid) -> AssumptionReport {
        validate_assumptions(&self.sigma_t, &self.sigma_s, grid)
    }

    /// Attenuation `E(x, y)` along the segment from `x` to `y`.
    ///
    /// `E(x, x) = 1`. Constant `sigma_t` uses the closed form; otherwise a
    /// composite trapezoid rule with step `min(ell / 2, |x - y|)` and at
    /// least two samples.
    pub fn attenuation(&self, x: Point, y: Point) -> f64 {
        let d = dist(x, y);
        if d == 0.0 {
            return 1.0;
        }
        if let Some(st) = self.sigma_t.constant_value() {
            return (-st * d).exp();
        }
        (-self.line_integral_sigma_t(x, y, d)).exp()
    }

    fn line_integral_sigma_t(&self, x: Point, y: Point, d: f64) -> f64 {
        let target = self.path_step.min(d);
        let n = (d / target).ceil() as usize;
        let n = n.max(1);
        let dx = (y[0] - x[0]) / n as f64;
        let dy = (y[1] - x[1]) / n as f64;
        let mut sum = 0.5 * (self.sigma_t.eval(x) + self.sigma_t.eval(y));
        for i in 1..n {
            sum += self
                .sigma_t
                .eval([x[0] + i as f64 * dx, x[1] + i as f64 * dy]);
        }
        sum * d / n as f64
    }

    /// Attenuation between two collocation points, served from the dense
    /// cache when it has been precomputed.
    #[inline]
    pub fn attenuation_pair(&self, p: usize, q: usize, xp: Point, xq: Point) -> f64 {
        if let Some(cache) = &self.pair_cache {
            return cache[p * self.num_points + q];
        }
        self.attenuation(xp, xq)
    }

    /// Precomputes `E(x_p, x_q)` for all collocation pairs (`O(M^2)` memory).
    /// Worth it for variable coefficients reused across many time steps.
    pub fn precompute_pair_attenuation(&mut self, grid: &CollocationGrid) {
        use rayon::prelude::*;
        let m = grid.num_points();
        let pts = grid.points();
        let mut cache = vec![0.0f64; m * m];
        cache
            .par_chunks_mut(m)
            .enumerate()
            .for_each(|(p, row)| {
                for (q, slot) in row.iter_mut().enumerate() {
                    *slot = self.attenuation(pts[p], pts[q]);
                }
            });
        self.pair_cache = Some(Arc::new(cache));
        self.num_points = m;
    }

    /// Whether the dense pair cache is active.
    #[inline]
    pub fn has_pair_cache(&self) -> bool {
        self.pair_cache.is_some()
    }

    fn pair_cache_slice(&self) -> Option<&[f64]> {
        self.pair_cache.as_deref().map(|v| v.as_slice())
    }
}

/// Attenuation dispatch resolved once per step, for the solver hot loops.
///
/// Distances are computed by the callers anyway, so the constant-coefficient
/// branch reuses them instead of rederiving the segment length.
pub enum PairAttenuation<'a> {
    Constant(f64),
    Cached {
        cache: &'a [f64],
        num_points: usize,
        medium: &'a MediumModel,
    },
    General(&'a MediumModel),
}

impl<'a> PairAttenuation<'a> {
    pub fn new(medium: &'a MediumModel) -> Self {
        if let Some(cache) = medium.pair_cache_slice() {
            PairAttenuation::Cached {
                cache,
                num_points: medium.num_points,
                medium,
            }
        } else if let Some(st) = medium.sigma_t.constant_value() {
            PairAttenuation::Constant(st)
        } else {
            PairAttenuation::General(medium)
        }
    }

    /// `E(x_p, x_q)` for a collocation pair.
    #[inline]
    pub fn eval_pair(&self, p: usize, q: usize, xp: Point, xq: Point, distance: f64) -> f64 {
        match self {
            PairAttenuation::Constant(st) => (-st * distance).exp(),
            PairAttenuation::Cached {
                cache, num_points, ..
            } => cache[p * num_points + q],
            PairAttenuation::General(med) => med.attenuation(xp, xq),
        }
    }

    /// `E(x, y)` for arbitrary points; interpolation nodes sit off-grid, so
    /// the dense pair cache never applies here.
    #[inline]
    pub fn eval_points(&self, x: Point, y: Point, distance: f64) -> f64 {
        match self {
            PairAttenuation::Constant(st) => (-st * distance).exp(),
            PairAttenuation::Cached { medium, .. } => medium.attenuation(x, y),
            PairAttenuation::General(med) => med.attenuation(x, y),
        }
    }
}

/// Isotropic time-dependent source `f(t, x)`, zero for `t < 0`.
#[derive(Clone)]
pub enum SourceModel {
    /// Identically zero.
    Zero,
    /// `4 t^2 exp(-40 |x - r(t)|^2)` with
    /// `r(t) = (1/2 + cos(4 pi t)/5, 1/2 + sin(4 pi t)/5)`: a Gaussian spot
    /// of increasing intensity traveling two rounds around the center.
    Benchmark,
    /// Arbitrary callable; must satisfy `f(0, x) = 0`.
    Custom(Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for SourceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceModel::Zero => write!(f, "Zero"),
            SourceModel::Benchmark => write!(f, "Benchmark"),
            SourceModel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl SourceModel {
    /// Evaluates `f(t, x)`; returns 0 for `t < 0` by convention.
    pub fn eval(&self, t: f64, x: Point) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            SourceModel::Zero => 0.0,
            SourceModel::Benchmark => {
                let phase = 4.0 * std::f64::consts::PI * t;
                let cx = 0.5 + 0.2 * phase.cos();
                let cy = 0.5 + 0.2 * phase.sin();
                let dx = x[0] - cx;
                let dy = x[1] - cy;
                4.0 * t * t * (-40.0 * (dx * dx + dy * dy)).exp()
            }
            SourceModel::Custom(f) => f(t, x),
        }
    }
}

/// Loads grid-sampled coefficients from a CSV file with header
/// `i,j,sigma_t,sigma_s` and one row per cell in row-major order.
pub fn load_medium_csv(
    path: &Path,
    grid: &CollocationGrid,
) -> Result<(ScalarField, ScalarField)> {
    let text = std::fs::read_to_string(path)?;
    let m = grid.points_per_side();
    let mut sigma_t = vec![f64::NAN; grid.num_points()];
    let mut sigma_s = vec![f64::NAN; grid.num_points()];
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "i,j,sigma_t,sigma_s" => {}
        other => {
            return Err(RteError::InvalidArgument(format!(
                "medium CSV must start with header 'i,j,sigma_t,sigma_s', got {:?}",
                other.map(|(_, l)| l)
            )));
        }
    }
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(RteError::InvalidArgument(format!(
                "medium CSV line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| {
                RteError::InvalidArgument(format!(
                    "medium CSV line {}: bad {what} '{s}': {e}",
                    lineno + 1
                ))
            })
        };
        let i = parse(fields[0], "i")? as usize;
        let j = parse(fields[1], "j")? as usize;
        if i >= m || j >= m {
            return Err(RteError::InvalidArgument(format!(
                "medium CSV line {}: cell ({i}, {j}) outside {m}x{m} grid",
                lineno + 1
            )));
        }
        let p = grid.index(i, j);
        sigma_t[p] = parse(fields[2], "sigma_t")?;
        sigma_s[p] = parse(fields[3], "sigma_s")?;
        seen += 1;
    }
    if seen != grid.num_points() {
        return Err(RteError::InvalidArgument(format!(
            "medium CSV has {seen} rows, expected {}",
            grid.num_points()
        )));
    }
    Ok((
        ScalarField::from_grid_samples(grid, sigma_t)?,
        ScalarField::from_grid_samples(grid, sigma_s)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_attenuation_matches_closed_form() {
        let grid = build_uniform_grid(1.0 / 8.0).unwrap();
        let med = MediumModel::constant(5.2, 5.0, &grid).unwrap();
        let e = med.attenuation([0.0, 0.0], [0.5, 0.0]);
        assert_abs_diff_eq!(e, (-2.6f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(e, 0.074274, epsilon = 1e-6);
    }

    #[test]
    fn attenuation_at_zero_distance_is_one() {
        let grid = build_uniform_grid(0.25).unwrap();
        let med = MediumModel::new(
            ScalarField::Analytic(Arc::new(|x: Point| 1.0 + x[0] + x[1])),
            ScalarField::Constant(0.5),
            &grid,
        )
        .unwrap();
        assert_eq!(med.attenuation([0.3, 0.4], [0.3, 0.4]), 1.0);
    }

    #[test]
    fn affine_field_line_integral_is_exact() {
        // Trapezoid integrates affine integrands exactly:
        // int_0^1 (1 + s) ds = 3/2 along (0,0) -> (1,0).
        let grid = build_uniform_grid(1.0 / 8.0).unwrap();
        let med = MediumModel::new(
            ScalarField::Analytic(Arc::new(|x: Point| 1.0 + x[0])),
            ScalarField::Constant(0.1),
            &grid,
        )
        .unwrap();
        let e = med.attenuation([0.0, 0.0], [1.0, 0.0]);
        assert_abs_diff_eq!(e, (-1.5f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn attenuation_is_multiplicative_on_aligned_splits() {
        // ell/2 = 0.25; the full segment [0,1] and the halves [0,1/2],
        // [1/2,1] all sample at multiples of 0.25, so the trapezoid sums
        // split exactly.
        let grid = build_uniform_grid(0.5).unwrap();
        let med = MediumModel::new(
            ScalarField::Analytic(Arc::new(|x: Point| 1.0 + x[0] * x[0])),
            ScalarField::Constant(0.1),
            &grid,
        )
        .unwrap();
        let x = [0.0, 0.25];
        let z = [0.5, 0.25];
        let y = [1.0, 0.25];
        let whole = med.attenuation(x, y);
        let split = med.attenuation(x, z) * med.attenuation(z, y);
        assert_abs_diff_eq!(whole, split, epsilon = 1e-12);
    }

    #[test]
    fn attenuation_is_symmetric() {
        let grid = build_uniform_grid(0.125).unwrap();
        let constant = MediumModel::constant(3.0, 1.0, &grid).unwrap();
        assert_abs_diff_eq!(
            constant.attenuation([0.1, 0.2], [0.8, 0.9]),
            constant.attenuation([0.8, 0.9], [0.1, 0.2]),
            epsilon = 1e-16
        );
        let variable = MediumModel::new(
            ScalarField::Analytic(Arc::new(|x: Point| 1.0 + x[0] + 2.0 * x[1] * x[1])),
            ScalarField::Constant(0.1),
            &grid,
        )
        .unwrap();
        assert_abs_diff_eq!(
            variable.attenuation([0.1, 0.2], [0.8, 0.9]),
            variable.attenuation([0.8, 0.9], [0.1, 0.2]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn attenuation_decays_along_a_ray() {
        let grid = build_uniform_grid(0.125).unwrap();
        let med = MediumModel::constant(2.0, 1.0, &grid).unwrap();
        let x = [0.1, 0.1];
        let mut prev = 1.0;
        for k in 1..8 {
            let y = [0.1 + 0.1 * k as f64, 0.1];
            let e = med.attenuation(x, y);
            assert!(e > 0.0 && e <= 1.0);
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn benchmark_source_examples() {
        let src = SourceModel::Benchmark;
        assert_eq!(src.eval(0.0, [0.3, 0.9]), 0.0);
        assert_abs_diff_eq!(src.eval(0.5, [0.7, 0.5]), 1.0, epsilon = 1e-12);
        assert_eq!(src.eval(-0.1, [0.5, 0.5]), 0.0);
    }

    #[test]
    fn validation_examples() {
        let grid = build_uniform_grid(0.25).unwrap();
        let report = validate_assumptions(
            &ScalarField::Constant(5.2),
            &ScalarField::Constant(5.0),
            &grid,
        );
        assert!(report.pass);
        assert_abs_diff_eq!(report.k0, 25.0 / 26.0, epsilon = 1e-12);

        let pure_absorber = validate_assumptions(
            &ScalarField::Constant(1.0),
            &ScalarField::Constant(0.0),
            &grid,
        );
        assert!(pure_absorber.pass);
        assert_eq!(pure_absorber.k0, 0.0);

        let bad = validate_assumptions(
            &ScalarField::Constant(1.0),
            &ScalarField::Constant(2.0),
            &grid,
        );
        assert!(!bad.pass);
        assert_abs_diff_eq!(bad.k0, 2.0, epsilon = 1e-12);
        assert!(MediumModel::constant(1.0, 2.0, &grid).is_err());
    }

    #[test]
    fn validation_flags_non_finite_samples() {
        let grid = build_uniform_grid(0.5).unwrap();
        let field = ScalarField::Analytic(Arc::new(|x: Point| {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                1.0
            }
        }));
        let report = validate_assumptions(&field, &ScalarField::Constant(0.5), &grid);
        assert!(!report.pass);
        let why = report.failure.unwrap();
        assert!(why.contains("point 1"), "{why}");
    }

    #[test]
    fn pair_cache_matches_direct_evaluation() {
        let grid = build_uniform_grid(0.25).unwrap();
        let mut med = MediumModel::new(
            ScalarField::Analytic(Arc::new(|x: Point| 1.0 + x[0] + x[1])),
            ScalarField::Constant(0.5),
            &grid,
        )
        .unwrap();
        let before: Vec<f64> = (0..grid.num_points())
            .map(|q| med.attenuation(grid.point(0), grid.point(q)))
            .collect();
        med.precompute_pair_attenuation(&grid);
        assert!(med.has_pair_cache());
        for q in 0..grid.num_points() {
            assert_eq!(
                med.attenuation_pair(0, q, grid.point(0), grid.point(q)),
                before[q]
            );
        }
    }

    #[test]
    fn grid_sampled_field_interpolates_and_loads_from_csv() {
        let grid = build_uniform_grid(0.25).unwrap();
        let mut csv = String::from("i,j,sigma_t,sigma_s\n");
        for j in 0..4 {
            for i in 0..4 {
                csv.push_str(&format!("{i},{j},{},{}\n", 2.0 + i as f64, 1.0));
            }
        }
        let dir = std::env::temp_dir().join("rte_medium_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("medium.csv");
        std::fs::write(&path, csv).unwrap();
        let (sigma_t, sigma_s) = load_medium_csv(&path, &grid).unwrap();
        // Exact at centroids, linear between them.
        assert_abs_diff_eq!(sigma_t.eval([0.125, 0.125]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_t.eval([0.375, 0.125]), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_t.eval([0.25, 0.125]), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma_s.eval([0.9, 0.9]), 1.0, epsilon = 1e-12);

        std::fs::write(&path, "x,y\n").unwrap();
        assert!(load_medium_csv(&path, &grid).is_err());
    }
}
