//! Error metrics, nested-grid self-convergence, and reconstruction of the
//! directional solution from the angular average.

use crate::direct;
use crate::error::{Result, RteError};
use crate::geom::Point;
use crate::grid::{build_time_grid, build_uniform_grid, ray_exit_distance, CollocationGrid};
use crate::history::SolutionHistory;
use crate::kernel::hat;
use crate::medium::{MediumModel, ScalarField, SourceModel};
use crate::treecode::{self, TreecodeParams};

/// Relative discrepancy between two vectors on the same point set.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// `||reference - candidate||_2 / ||reference||_2`.
    pub relative_l2: f64,
    /// Largest pointwise absolute difference.
    pub max_abs_diff: f64,
    /// Number of compared points.
    pub count: usize,
    /// Which points were compared.
    pub mapping: String,
}

/// Relative l2 and max-norm error of `candidate` against `reference`.
pub fn relative_l2(reference: &[f64], candidate: &[f64]) -> Result<ErrorReport> {
    if reference.len() != candidate.len() {
        return Err(RteError::InvalidArgument(format!(
            "length mismatch: reference {} vs candidate {}",
            reference.len(),
            candidate.len()
        )));
    }
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    let mut max_abs = 0.0f64;
    for (r, c) in reference.iter().zip(candidate) {
        let d = r - c;
        diff2 += d * d;
        ref2 += r * r;
        max_abs = max_abs.max(d.abs());
    }
    if ref2 == 0.0 {
        return Err(RteError::InvalidArgument(
            "reference vector has zero norm".into(),
        ));
    }
    Ok(ErrorReport {
        relative_l2: (diff2 / ref2).sqrt(),
        max_abs_diff: max_abs,
        count: reference.len(),
        mapping: "identical point sets".into(),
    })
}

/// Extracts the fine-grid values at the coarse collocation points.
///
/// Requires the odd-factor family: `m_fine = ratio * m_coarse` with `ratio`
/// odd, so every coarse centroid is exactly a fine centroid and the
/// restriction is pure index extraction.
pub fn restrict_vector(
    fine: &[f64],
    fine_grid: &CollocationGrid,
    coarse_grid: &CollocationGrid,
) -> Result<Vec<f64>> {
    let mf = fine_grid.points_per_side();
    let mc = coarse_grid.points_per_side();
    if fine.len() != fine_grid.num_points() {
        return Err(RteError::InvalidArgument(format!(
            "fine vector has {} entries for a grid of {}",
            fine.len(),
            fine_grid.num_points()
        )));
    }
    if !mf.is_multiple_of(mc) || (mf / mc).is_multiple_of(2) {
        return Err(RteError::IncompatibleGrids(format!(
            "{mf} cells per side is not an odd multiple of {mc}"
        )));
    }
    let ratio = mf / mc;
    let shift = (ratio - 1) / 2;
    let mut out = Vec::with_capacity(coarse_grid.num_points());
    for j in 0..mc {
        let fj = ratio * j + shift;
        for i in 0..mc {
            let fi = ratio * i + shift;
            out.push(fine[fine_grid.index(fi, fj)]);
        }
    }
    Ok(out)
}

/// Restricts the final-time solution of `history` to the coarse points.
pub fn restrict_final_to_coarse(
    history: &SolutionHistory,
    fine_grid: &CollocationGrid,
    coarse_grid: &CollocationGrid,
) -> Result<Vec<f64>> {
    let last = history.num_steps();
    let w = history
        .w(last)
        .ok_or_else(|| RteError::Internal(format!("final level {last} not retained")))?;
    restrict_vector(w, fine_grid, coarse_grid)
}

/// Which evaluator drives a convergence run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Direct,
    Treecode,
}

/// Setup of a nested-grid self-convergence study over cell sizes
/// `ell_k = 1 / (base * (2k - 1))` with `h = ell` on every level.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    /// Cells per side of the coarsest family member (`k = 1`).
    pub base_points_per_side: usize,
    /// Family levels `k`; the largest is the reference.
    pub levels: Vec<usize>,
    pub solver: SolverChoice,
    pub theta: f64,
    pub order: usize,
    pub leaf_capacity: usize,
    pub plan_memory_budget: usize,
    pub sigma_t: ScalarField,
    pub sigma_s: ScalarField,
    pub source: SourceModel,
    pub horizon: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            base_points_per_side: 24,
            levels: vec![1, 2, 3],
            solver: SolverChoice::Treecode,
            theta: 0.3,
            order: 3,
            leaf_capacity: 64,
            plan_memory_budget: TreecodeParams::default().plan_memory_budget,
            sigma_t: ScalarField::Constant(5.2),
            sigma_s: ScalarField::Constant(5.0),
            source: SourceModel::Benchmark,
            horizon: 1.0,
        }
    }
}

/// One measured level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub level: usize,
    pub cell_size: f64,
    pub num_points: usize,
    /// Relative l2 error against the reference on the base-grid points at
    /// the final time.
    pub error_l2: f64,
    /// Modulus `omega(ell) = ell (1 + |log ell|)`, the theoretical envelope.
    pub omega: f64,
}

/// Outcome of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub reference_level: usize,
    pub reference_cell_size: f64,
    /// Least-squares slope of `log error` against `log ell`.
    pub slope: f64,
}

/// Modulus of continuity `omega(s) = s (1 + |log s|)`.
pub fn omega(s: f64) -> f64 {
    s * (1.0 + s.ln().abs())
}

/// Self-convergence study: solves every family level, restricts to the
/// base-grid points at final time, and reports per-level errors against the
/// finest (reference) level together with the fitted log-log slope.
pub fn convergence_study(config: &ConvergenceConfig) -> Result<ConvergenceStudy> {
    let mut levels = config.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 3 {
        return Err(RteError::InvalidArgument(format!(
            "a convergence study needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels[0] == 0 {
        return Err(RteError::InvalidArgument("levels are 1-based".into()));
    }
    let base_grid = build_uniform_grid(1.0 / config.base_points_per_side as f64)?;
    let reference_level = *levels.last().expect("nonempty");

    let solve_level = |k: usize| -> Result<(CollocationGrid, Vec<f64>)> {
        let m = config.base_points_per_side * (2 * k - 1);
        let grid = build_uniform_grid(1.0 / m as f64)?;
        let time_grid = build_time_grid(config.horizon, grid.cell_size())?;
        let medium = MediumModel::new(config.sigma_t.clone(), config.sigma_s.clone(), &grid)?;
        let options = direct::SolverOptions::default();
        let result = match config.solver {
            SolverChoice::Direct => {
                direct::solve(&grid, &time_grid, &medium, &config.source, &options)?
            }
            SolverChoice::Treecode => treecode::solve_treecode(
                &grid,
                &time_grid,
                &medium,
                &config.source,
                &TreecodeParams {
                    theta: config.theta,
                    order: config.order,
                    leaf_capacity: config.leaf_capacity,
                    plan_memory_budget: config.plan_memory_budget,
                },
                &options,
            )?,
        };
        let restricted = restrict_final_to_coarse(&result.history, &grid, &base_grid)?;
        Ok((grid, restricted))
    };

    let (_, reference) = solve_level(reference_level)?;

    let mut rows = Vec::new();
    for &k in levels.iter().filter(|&&k| k != reference_level) {
        let (grid, values) = solve_level(k)?;
        let report = relative_l2(&reference, &values)?;
        rows.push(ConvergenceRow {
            level: k,
            cell_size: grid.cell_size(),
            num_points: grid.num_points(),
            error_l2: report.relative_l2,
            omega: omega(grid.cell_size()),
        });
    }

    let slope = fit_loglog_slope(
        &rows.iter().map(|r| r.cell_size).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error_l2).collect::<Vec<_>>(),
    );
    Ok(ConvergenceStudy {
        rows,
        reference_level,
        reference_cell_size: 1.0 / (config.base_points_per_side * (2 * reference_level - 1)) as f64,
        slope,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

/// Piecewise-constant-in-space, hat-in-time interpolant of the marched
/// angular average at `(t, x)`; zero for `t < 0`.
fn interpolate_mean(
    t: f64,
    x: Point,
    history: &SolutionHistory,
    grid: &CollocationGrid,
) -> Result<f64> {
    if t < 0.0 {
        return Ok(0.0);
    }
    let cell = grid.cell_of(x);
    let d = t / history.step();
    let l0 = d.floor() as usize;
    let mut value = 0.0;
    for l in [l0, l0 + 1] {
        if l > history.num_steps() {
            continue;
        }
        let weight = hat(d - l as f64);
        if weight == 0.0 {
            continue;
        }
        let w = history
            .w(l)
            .ok_or_else(|| RteError::Internal(format!("level {l} not retained")))?;
        value += weight * w[cell];
    }
    Ok(value)
}

/// Reconstructs the directional solution `u(t, x, v)` from the marched
/// angular average:
///
/// ```text
/// u(t, x, v) = int_0^{tau(x, v)} E(x, x - r v) R(t - r, x - r v) dr,
/// R = sigma_s <u>_h + f,
/// ```
///
/// by a composite trapezoid rule with step `ell / 2`.
pub fn directional_solution(
    t: f64,
    x: Point,
    v: Point,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    medium: &MediumModel,
    source: &SourceModel,
) -> Result<f64> {
    let horizon = history.num_steps() as f64 * history.step();
    if !(0.0..=horizon + 1e-12).contains(&t) {
        return Err(RteError::InvalidArgument(format!(
            "query time {t} outside [0, {horizon}]"
        )));
    }
    let tau = ray_exit_distance(x, v)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let n_sub = ((tau / (grid.cell_size() / 2.0)).ceil() as usize).max(1);
    let dr = tau / n_sub as f64;
    let integrand = |r: f64| -> Result<f64> {
        let y = [x[0] - r * v[0], x[1] - r * v[1]];
        let mean = interpolate_mean(t - r, y, history, grid)?;
        let rhs = medium.sigma_s(y) * mean + source.eval(t - r, y);
        Ok(medium.attenuation(x, y) * rhs)
    };
    let mut sum = 0.5 * (integrand(0.0)? + integrand(tau)?);
    for i in 1..n_sub {
        sum += integrand(i as f64 * dr)?;
    }
    Ok(sum * dr)
}
