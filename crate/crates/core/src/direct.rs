//! Direct `O(M^2)`-per-step time marching of the collocation scheme.
//!
//! At level `l` the scheme reads
//!
//! ```text
//! w_l^p = (1/nu_1) sum_q sum_{k<=l} W(x_p, x_q) V(|x_p - x_q|/h + k - l)
//!                                   (sigma_s(x_q) w_k^q + c_k^q)
//! ```
//!
//! For any pair at most two retarded levels carry a nonzero hat weight, and
//! causality restricts them to `k <= l`. When `h <= ell` the only same-level
//! term is the self pair `q = p` (distinct collocation points are at least
//! `ell` apart), so the step is resolved explicitly by a scalar division:
//!
//! ```text
//! w_l^p = (rhs_p + a_pp c_l^p) / (1 - a_pp sigma_s(x_p)),
//! a_pp = W(x_p, x_p) / nu_1.
//! ```
//!
//! When `h > ell` neighboring points couple at the current level; an opt-in
//! Jacobi fixed-point iteration handles that regime, converging by the
//! contraction property of the attenuated row sums.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Result, RteError};
use crate::grid::{CollocationGrid, TimeGrid};
use crate::history::{SolutionHistory, SolveResult, SolveStats};
use crate::kernel::{CellWeightTable, UNIT_SPHERE_MEASURE_2D};
use crate::medium::{MediumModel, PairAttenuation, SourceModel};

/// One contributing retarded level and its hat weight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActiveLag {
    pub level: usize,
    pub weight: f64,
}

/// The at-most-two active lags of a pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct LagSet {
    items: [ActiveLag; 2],
    len: u8,
}

impl LagSet {
    #[inline]
    fn push(&mut self, level: usize, weight: f64) {
        self.items[self.len as usize] = ActiveLag { level, weight };
        self.len += 1;
    }

    #[inline]
    pub fn as_slice(&self) -> &[ActiveLag] {
        &self.items[..self.len as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Retarded levels `k` with `0 <= k <= level` and
/// `V(distance/step + k - level) > 0`, paired with the weights.
///
/// Writing `D = distance / step = lag + frac`, the candidates are
/// `k = level - lag` with weight `1 - frac` and `k = level - lag - 1` with
/// weight `frac`; zero weights and out-of-range levels are dropped, so the
/// result has at most two entries.
#[inline]
pub fn active_lags(distance: f64, step: f64, level: usize) -> LagSet {
    let d = distance / step;
    let lag = d.floor();
    let frac = d - lag;
    let mut out = LagSet::default();
    if lag <= level as f64 {
        // V(frac) = 1 - frac > 0 since frac < 1.
        out.push(level - lag as usize, 1.0 - frac);
    }
    if frac > 0.0 && lag + 1.0 <= level as f64 {
        // V(frac - 1) = frac.
        out.push(level - lag as usize - 1, frac);
    }
    out
}

/// Treatment of the same-level coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SameLevelMode {
    /// Requires `h <= ell`; the self term is resolved by a scalar division.
    Explicit,
    /// Jacobi fixed-point iteration over the same-level coupled terms, for
    /// `h > ell`.
    Jacobi { tolerance: f64, max_iterations: usize },
}

impl SameLevelMode {
    /// Default Jacobi parameters.
    pub fn jacobi() -> Self {
        SameLevelMode::Jacobi {
            tolerance: 1e-12,
            max_iterations: 100,
        }
    }
}

/// Knobs shared by the direct and treecode solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub same_level: SameLevelMode,
    /// Retain every time level instead of only the active window.
    pub keep_all_levels: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            same_level: SameLevelMode::Explicit,
            keep_all_levels: false,
        }
    }
}

/// Diagonal weight `a_pp = W(x_p, x_p) / nu_1` shared by both solvers.
#[inline]
pub(crate) fn diagonal_weight(table: &CellWeightTable) -> f64 {
    table.self_entry() / UNIT_SPHERE_MEASURE_2D
}

/// Resolves the same-level self term: `(rhs + a_pp c) / (1 - a_pp sigma_s)`.
#[inline]
pub(crate) fn resolve_diagonal(
    p: usize,
    rhs: f64,
    source: f64,
    sigma_s: f64,
    a_diag: f64,
) -> Result<f64> {
    let divisor = 1.0 - a_diag * sigma_s;
    if divisor <= 0.0 {
        return Err(RteError::ContractionViolated { point: p, divisor });
    }
    Ok((rhs + a_diag * source) / divisor)
}

/// Advances one time level of the scheme.
///
/// `history` must hold every level `k < level` still inside the hat reach;
/// `source_at_level` carries `c_l^p`. Returns the new solution vector.
pub fn step(
    level: usize,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    medium: &MediumModel,
    table: &CellWeightTable,
    source_at_level: &[f64],
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    let sigma_s_pts: Vec<f64> = grid.points().iter().map(|&x| medium.sigma_s(x)).collect();
    step_with_sigma(
        level,
        history,
        grid,
        medium,
        table,
        &sigma_s_pts,
        source_at_level,
        options,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step_with_sigma(
    level: usize,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    medium: &MediumModel,
    table: &CellWeightTable,
    sigma_s_pts: &[f64],
    source_at_level: &[f64],
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    let h = history.step();
    let ell = grid.cell_size();
    match options.same_level {
        SameLevelMode::Explicit => {
            if h > ell * (1.0 + 1e-12) {
                return Err(RteError::NeedsIterativeMode {
                    step: h,
                    cell_size: ell,
                });
            }
            step_explicit(
                level,
                history,
                grid,
                medium,
                table,
                sigma_s_pts,
                source_at_level,
            )
        }
        SameLevelMode::Jacobi {
            tolerance,
            max_iterations,
        } => step_jacobi(
            level,
            history,
            grid,
            medium,
            table,
            sigma_s_pts,
            source_at_level,
            tolerance,
            max_iterations,
        ),
    }
}

/// Borrowed strength slices for every level reachable from `level`.
fn window_strengths(history: &SolutionHistory, level: usize) -> Result<(usize, Vec<&[f64]>)> {
    let oldest = history.oldest_active_level().unwrap_or(0);
    let mut slices = Vec::with_capacity(level.saturating_sub(oldest));
    for k in oldest..level {
        slices.push(history.strength(k).ok_or_else(|| {
            RteError::Internal(format!("history level {k} missing while stepping level {level}"))
        })?);
    }
    Ok((oldest, slices))
}

fn step_explicit(
    level: usize,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    medium: &MediumModel,
    table: &CellWeightTable,
    sigma_s_pts: &[f64],
    source_at_level: &[f64],
) -> Result<Vec<f64>> {
    let m = grid.num_points();
    let mps = grid.points_per_side();
    let pts = grid.points();
    let h = history.step();
    let a_diag = diagonal_weight(table);
    let attenuation = PairAttenuation::new(medium);
    let (oldest, strengths) = window_strengths(history, level)?;

    (0..m)
        .into_par_iter()
        .map(|p| {
            let xp = pts[p];
            let ip = (p % mps) as isize;
            let jp = (p / mps) as isize;
            let mut acc = 0.0;
            for q in 0..m {
                let xq = pts[q];
                let dx = xp[0] - xq[0];
                let dy = xp[1] - xq[1];
                let distance = (dx * dx + dy * dy).sqrt();
                let lags = active_lags(distance, h, level);
                let mut weight = f64::NAN;
                for lag in lags.as_slice() {
                    if lag.level == level {
                        // Same-level term: only the self pair reaches here
                        // when h <= ell; it is resolved by the diagonal
                        // division below.
                        continue;
                    }
                    if weight.is_nan() {
                        let iq = (q % mps) as isize;
                        let jq = (q / mps) as isize;
                        weight = attenuation.eval_pair(p, q, xp, xq, distance)
                            * table.get(ip - iq, jp - jq);
                    }
                    acc += weight * lag.weight * strengths[lag.level - oldest][q];
                }
            }
            acc /= UNIT_SPHERE_MEASURE_2D;
            resolve_diagonal(p, acc, source_at_level[p], sigma_s_pts[p], a_diag)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn step_jacobi(
    level: usize,
    history: &SolutionHistory,
    grid: &CollocationGrid,
    medium: &MediumModel,
    table: &CellWeightTable,
    sigma_s_pts: &[f64],
    source_at_level: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let m = grid.num_points();
    let mps = grid.points_per_side();
    let pts = grid.points();
    let h = history.step();
    let attenuation = PairAttenuation::new(medium);
    let (oldest, strengths) = window_strengths(history, level)?;
    let nu = UNIT_SPHERE_MEASURE_2D;

    // Split the step into a constant part (history lags and the same-level
    // source terms) and the same-level scattering coupling.
    let parts: Vec<(f64, Vec<(usize, f64)>)> = (0..m)
        .into_par_iter()
        .map(|p| {
            let xp = pts[p];
            let ip = (p % mps) as isize;
            let jp = (p / mps) as isize;
            let mut constant = 0.0;
            let mut coupling = Vec::new();
            for q in 0..m {
                let xq = pts[q];
                let dx = xp[0] - xq[0];
                let dy = xp[1] - xq[1];
                let distance = (dx * dx + dy * dy).sqrt();
                let lags = active_lags(distance, h, level);
                if lags.is_empty() {
                    continue;
                }
                let iq = (q % mps) as isize;
                let jq = (q / mps) as isize;
                let weight =
                    attenuation.eval_pair(p, q, xp, xq, distance) * table.get(ip - iq, jp - jq);
                for lag in lags.as_slice() {
                    if lag.level == level {
                        constant += weight * lag.weight * source_at_level[q] / nu;
                        coupling.push((q, weight * lag.weight * sigma_s_pts[q] / nu));
                    } else {
                        constant += weight * lag.weight * strengths[lag.level - oldest][q] / nu;
                    }
                }
            }
            (constant, coupling)
        })
        .collect();

    // Jacobi iteration; the coupling row sums are bounded by the measured
    // contraction constant, so this converges geometrically.
    let mut w: Vec<f64> = if level == 0 {
        vec![0.0; m]
    } else {
        history
            .w(level - 1)
            .ok_or_else(|| RteError::Internal("previous level missing".into()))?
            .to_vec()
    };
    for _ in 0..max_iterations {
        let next: Vec<f64> = parts
            .par_iter()
            .map(|(constant, coupling)| {
                let mut v = *constant;
                for &(q, c) in coupling {
                    v += c * w[q];
                }
                v
            })
            .collect();
        let diff = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let scale = next.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        w = next;
        if diff <= tolerance * scale.max(1.0) {
            return Ok(w);
        }
    }
    Err(RteError::NoConvergence(format!(
        "Jacobi did not reach {tolerance:.1e} within {max_iterations} iterations at level {level}"
    )))
}

/// Marches the full scheme from `t = 0` to the horizon with direct
/// summation. Records per-step wall-clock times for the benchmark harness.
pub fn solve(
    grid: &CollocationGrid,
    time_grid: &TimeGrid,
    medium: &MediumModel,
    source: &SourceModel,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let start = Instant::now();
    let report = medium.assumption_report(grid);
    if !report.pass {
        return Err(RteError::AssumptionViolated(
            report.failure.unwrap_or_else(|| "coefficient check failed".into()),
        ));
    }
    if matches!(options.same_level, SameLevelMode::Explicit)
        && time_grid.step() > grid.cell_size() * (1.0 + 1e-12)
    {
        return Err(RteError::NeedsIterativeMode {
            step: time_grid.step(),
            cell_size: grid.cell_size(),
        });
    }

    let table = CellWeightTable::build(grid);
    let sigma_s_pts: Vec<f64> = grid.points().iter().map(|&x| medium.sigma_s(x)).collect();
    let mut history = SolutionHistory::new(grid.num_points(), time_grid, options.keep_all_levels);
    let mut per_step = Vec::with_capacity(time_grid.num_steps() + 1);

    for level in 0..=time_grid.num_steps() {
        let tick = Instant::now();
        let t = time_grid.node(level);
        let source_l: Vec<f64> = grid.points().par_iter().map(|&x| source.eval(t, x)).collect();
        if level == 0 {
            let worst = source_l.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if worst > 0.0 {
                return Err(RteError::AssumptionViolated(format!(
                    "source must vanish at t = 0; max |f(0, x_p)| = {worst:e}"
                )));
            }
        }
        let w = step_with_sigma(
            level,
            &history,
            grid,
            medium,
            &table,
            &sigma_s_pts,
            &source_l,
            options,
        )?;
        let strength: Vec<f64> = w
            .iter()
            .zip(&sigma_s_pts)
            .zip(&source_l)
            .map(|((w, s), c)| s * w + c)
            .collect();
        history.push_level(w, source_l, strength);
        per_step.push(tick.elapsed().as_secs_f64());
    }

    Ok(SolveResult {
        history,
        stats: SolveStats {
            per_step_secs: per_step,
            total_secs: start.elapsed().as_secs_f64(),
        },
    })
}
