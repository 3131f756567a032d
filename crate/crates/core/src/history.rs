//! Ring-buffered record of the marched time levels.
//!
//! Level `k` holds the solution vector `w_k`, the source samples
//! `c_k = f(t_k, x_p)`, and the combined strength
//! `sigma_s(x_p) w_k^p + c_k^p` that drives later levels. A level stops
//! contributing once `l - k` exceeds `diam(domain) / h + 1` (the hat weight
//! vanishes), so only the most recent `ceil(sqrt(2)/h) + 2` levels are
//! retained unless the caller asks to keep everything.

use std::collections::VecDeque;

use crate::grid::TimeGrid;

/// One retained time level.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    /// Angular-averaged solution at the collocation points.
    pub w: Vec<f64>,
    /// Source samples `c_l^p = f(t_l, x_p)`.
    pub source: Vec<f64>,
    /// `sigma_s(x_p) w_l^p + c_l^p`.
    pub strength: Vec<f64>,
}

/// Time levels produced by a solve, with a bounded active window.
#[derive(Debug, Clone)]
pub struct SolutionHistory {
    num_points: usize,
    num_steps: usize,
    step: f64,
    window: usize,
    active: VecDeque<LevelRecord>,
    /// Levels evicted from the window, retained only in keep-all mode.
    archived: Vec<LevelRecord>,
    keep_all: bool,
}

impl SolutionHistory {
    /// Empty history for a grid of `num_points` points marched over
    /// `time_grid`.
    pub fn new(num_points: usize, time_grid: &TimeGrid, keep_all: bool) -> Self {
        let window = Self::window_for(time_grid);
        SolutionHistory {
            num_points,
            num_steps: time_grid.num_steps(),
            step: time_grid.step(),
            window,
            active: VecDeque::with_capacity(window.min(time_grid.num_steps() + 1)),
            archived: Vec::new(),
            keep_all,
        }
    }

    /// Number of levels the active window retains:
    /// `min(N + 1, ceil(sqrt(2)/h) + 2)`.
    pub fn window_for(time_grid: &TimeGrid) -> usize {
        let reach = (std::f64::consts::SQRT_2 / time_grid.step()).ceil() as usize + 2;
        reach.min(time_grid.num_steps() + 1)
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    #[inline]
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    #[inline]
    pub fn window(&self) -> usize {
        self.window
    }

    /// Most recent pushed level, if any.
    pub fn current_level(&self) -> Option<usize> {
        self.active.back().map(|r| r.level)
    }

    /// Oldest level still in the active window.
    pub fn oldest_active_level(&self) -> Option<usize> {
        self.active.front().map(|r| r.level)
    }

    /// Number of levels in the active window.
    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    /// Appends the next level. Levels must be pushed in order starting at 0.
    pub fn push_level(&mut self, w: Vec<f64>, source: Vec<f64>, strength: Vec<f64>) {
        let level = self.current_level().map_or(0, |l| l + 1);
        debug_assert_eq!(w.len(), self.num_points);
        debug_assert_eq!(source.len(), self.num_points);
        debug_assert_eq!(strength.len(), self.num_points);
        self.active.push_back(LevelRecord {
            level,
            w,
            source,
            strength,
        });
        if self.active.len() > self.window {
            let evicted = self.active.pop_front().expect("window overflow");
            if self.keep_all {
                self.archived.push(evicted);
            }
        }
    }

    fn record(&self, level: usize) -> Option<&LevelRecord> {
        let front = self.active.front()?.level;
        if level >= front {
            self.active.get(level - front)
        } else if self.keep_all {
            self.archived.get(level)
        } else {
            None
        }
    }

    /// Solution vector at `level`, if retained.
    #[inline]
    pub fn w(&self, level: usize) -> Option<&[f64]> {
        self.record(level).map(|r| r.w.as_slice())
    }

    /// Source samples at `level`, if retained.
    #[inline]
    pub fn source(&self, level: usize) -> Option<&[f64]> {
        self.record(level).map(|r| r.source.as_slice())
    }

    /// Combined strength at `level`, if retained.
    #[inline]
    pub fn strength(&self, level: usize) -> Option<&[f64]> {
        self.record(level).map(|r| r.strength.as_slice())
    }

    /// Solution at the most recent level.
    pub fn latest_w(&self) -> &[f64] {
        &self.active.back().expect("empty history").w
    }
}

/// Wall-clock accounting for a solve, exclusive of any file I/O.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    /// Seconds spent producing each level (source sampling, right-hand
    /// sides, and moment updates where applicable).
    pub per_step_secs: Vec<f64>,
    /// Seconds for the whole march including setup.
    pub total_secs: f64,
}

/// A completed solve: the history and its timing record.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub history: SolutionHistory,
    pub stats: SolveStats,
}
