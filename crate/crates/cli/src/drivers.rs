//! Experiment drivers: single solves, the direct-vs-treecode sweep, the
//! self-convergence study, and the assumption check.

use std::path::{Path, PathBuf};

use rte_core::{
    build_time_grid, build_uniform_grid, convergence_study, load_medium_csv, relative_l2, solve,
    solve_treecode, validate_assumptions, AssumptionReport, CollocationGrid, ConvergenceConfig,
    ErrorReport, MediumModel, SameLevelMode, ScalarField, SolveResult, SolveStats, SolverChoice,
    SolverOptions, SourceModel, TimeGrid, TreecodeParams,
};

use crate::config::{CliError, MediumSpec, RunConfig, SolverMode, SourceSpec};
use crate::csvio;

struct Setup {
    grid: CollocationGrid,
    time_grid: TimeGrid,
    medium: MediumModel,
    source: SourceModel,
}

fn build_setup(cfg: &RunConfig, cell_size: f64) -> Result<Setup, CliError> {
    let grid = build_uniform_grid(cell_size)?;
    let step = cfg.step.unwrap_or(cell_size);
    let time_grid = build_time_grid(cfg.horizon, step)?;
    let (sigma_t, sigma_s) = medium_fields(&cfg.medium, &grid)?;
    let mut medium = MediumModel::new(sigma_t, sigma_s, &grid)?;
    if cfg.precompute_attenuation {
        medium.precompute_pair_attenuation(&grid);
    }
    Ok(Setup {
        grid,
        time_grid,
        medium,
        source: source_model(cfg.source),
    })
}

fn medium_fields(
    spec: &MediumSpec,
    grid: &CollocationGrid,
) -> Result<(ScalarField, ScalarField), CliError> {
    match spec {
        MediumSpec::Constant { sigma_t, sigma_s } => Ok((
            ScalarField::Constant(*sigma_t),
            ScalarField::Constant(*sigma_s),
        )),
        MediumSpec::Csv(path) => Ok(load_medium_csv(path, grid)?),
    }
}

fn source_model(spec: SourceSpec) -> SourceModel {
    match spec {
        SourceSpec::Benchmark => SourceModel::Benchmark,
        SourceSpec::Zero => SourceModel::Zero,
    }
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        same_level: if cfg.iterative {
            SameLevelMode::jacobi()
        } else {
            SameLevelMode::Explicit
        },
        keep_all_levels: cfg.keep_all_levels,
    }
}

fn treecode_params(cfg: &RunConfig, theta: f64, order: usize) -> TreecodeParams {
    TreecodeParams {
        theta,
        order,
        leaf_capacity: cfg.leaf_capacity,
        plan_memory_budget: cfg.plan_memory_budget,
    }
}

/// Runs `f` on a dedicated rayon pool of `threads` workers, or on the
/// default pool when unset.
pub fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn single_value<T: Copy>(values: &[T], what: &str) -> Result<T, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!(
            "this subcommand needs exactly one {what} value, got {}",
            values.len()
        ))),
    }
}

/// Outcome of a single solve.
#[derive(Debug)]
pub struct SingleOutcome {
    /// Files written, in order.
    pub files: Vec<PathBuf>,
    /// Direct-vs-treecode discrepancy when both solvers ran.
    pub error_report: Option<ErrorReport>,
    pub direct_stats: Option<SolveStats>,
    pub treecode_stats: Option<SolveStats>,
    /// Max of the final-time solution, for quick log lines.
    pub final_max: f64,
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}{ext}"))
}

#[allow(clippy::too_many_arguments)]
fn dump_solution(
    cfg: &RunConfig,
    setup: &Setup,
    result: &SolveResult,
    path: &Path,
    solver: &str,
    theta: Option<f64>,
    order: Option<usize>,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    csvio::write_solution_csv(path, &setup.grid, result.history.latest_w())?;
    files.push(path.to_path_buf());

    if cfg.keep_all_levels {
        let levels_path = path.with_extension("levels.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(&levels_path)?);
        use std::io::Write;
        writeln!(out, "level,t,x,y,w").map_err(CliError::from)?;
        for level in 0..=setup.time_grid.num_steps() {
            if let Some(w) = result.history.w(level) {
                let t = setup.time_grid.node(level);
                for (point, value) in setup.grid.points().iter().zip(w) {
                    writeln!(out, "{level},{t},{},{},{}", point[0], point[1], value)
                        .map_err(CliError::from)?;
                }
            }
        }
        files.push(levels_path);
    }

    let meta_path = path.with_extension("meta");
    let mut entries = vec![
        ("solver".to_string(), solver.to_string()),
        ("M".to_string(), setup.grid.num_points().to_string()),
        ("ell".to_string(), setup.grid.cell_size().to_string()),
        ("step".to_string(), setup.time_grid.step().to_string()),
        ("horizon".to_string(), setup.time_grid.horizon().to_string()),
        (
            "threads".to_string(),
            cfg.effective_threads()
                .map_or("default".to_string(), |n| n.to_string()),
        ),
        (
            "deterministic".to_string(),
            cfg.deterministic.to_string(),
        ),
        (
            "total_s".to_string(),
            result.stats.total_secs.to_string(),
        ),
        (
            "per_step_s".to_string(),
            result
                .stats
                .per_step_secs
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ),
    ];
    if let Some(theta) = theta {
        entries.push(("theta".to_string(), theta.to_string()));
    }
    if let Some(order) = order {
        entries.push(("cheb_order".to_string(), order.to_string()));
    }
    csvio::write_meta(&meta_path, &entries)?;
    files.push(meta_path);
    Ok(())
}

/// Solves one configuration, writes the solution dump(s) and timing
/// metadata, and reports the direct-vs-treecode discrepancy in `both` mode.
pub fn run_single(cfg: &RunConfig) -> Result<SingleOutcome, CliError> {
    let cell_size = cfg.single_cell_size()?;
    let setup = build_setup(cfg, cell_size)?;
    let options = solver_options(cfg);
    let theta = single_value(&cfg.thetas, "theta")?;
    let order = match cfg.orders.as_slice() {
        [] => 6,
        other => single_value(other, "cheb_order")?,
    };

    let (direct_result, tree_result) = with_pool(cfg.effective_threads(), || {
        let direct = match cfg.solver {
            SolverMode::Direct | SolverMode::Both => Some(solve(
                &setup.grid,
                &setup.time_grid,
                &setup.medium,
                &setup.source,
                &options,
            )),
            SolverMode::Treecode => None,
        };
        let tree = match cfg.solver {
            SolverMode::Treecode | SolverMode::Both => Some(solve_treecode(
                &setup.grid,
                &setup.time_grid,
                &setup.medium,
                &setup.source,
                &treecode_params(cfg, theta, order),
                &options,
            )),
            SolverMode::Direct => None,
        };
        (direct, tree)
    })?;
    let direct_result = direct_result.transpose()?;
    let tree_result = tree_result.transpose()?;

    let mut files = Vec::new();
    if let Some(out) = &cfg.out {
        match (&direct_result, &tree_result) {
            (Some(direct), Some(tree)) => {
                dump_solution(
                    cfg,
                    &setup,
                    direct,
                    &suffixed(out, "direct"),
                    "direct",
                    None,
                    None,
                    &mut files,
                )?;
                dump_solution(
                    cfg,
                    &setup,
                    tree,
                    &suffixed(out, "treecode"),
                    "treecode",
                    Some(theta),
                    Some(order),
                    &mut files,
                )?;
            }
            (Some(direct), None) => {
                dump_solution(cfg, &setup, direct, out, "direct", None, None, &mut files)?
            }
            (None, Some(tree)) => dump_solution(
                cfg,
                &setup,
                tree,
                out,
                "treecode",
                Some(theta),
                Some(order),
                &mut files,
            )?,
            (None, None) => unreachable!("some solver always runs"),
        }
    }

    let error_report = match (&direct_result, &tree_result) {
        (Some(direct), Some(tree)) => Some(relative_l2(
            direct.history.latest_w(),
            tree.history.latest_w(),
        )?),
        _ => None,
    };
    let final_max = direct_result
        .as_ref()
        .or(tree_result.as_ref())
        .map(|r| r.history.latest_w().iter().fold(0.0f64, |a, &v| a.max(v)))
        .unwrap_or(0.0);

    Ok(SingleOutcome {
        files,
        error_report,
        direct_stats: direct_result.map(|r| r.stats),
        treecode_stats: tree_result.map(|r| r.stats),
        final_max,
    })
}

/// One row of the timing/accuracy sweep.
#[derive(Debug, Clone)]
pub struct Exp1Row {
    pub m: usize,
    pub order: usize,
    pub theta: f64,
    pub t_dir_s: f64,
    pub t_tree_s: f64,
    pub e_l2: f64,
}

/// Experiment one: for every requested grid, run the direct solver once and
/// the treecode for every `(order, theta)` combination; report timings and
/// the relative l2 discrepancy at the final time. Rows are flushed to the
/// output file as they are produced.
pub fn run_experiment_one(cfg: &RunConfig) -> Result<Vec<Exp1Row>, CliError> {
    let cells = cfg.sweep_cell_sizes()?;
    let orders = if cfg.orders.is_empty() {
        vec![6]
    } else {
        cfg.orders.clone()
    };
    let options = solver_options(cfg);
    let mut writer = match &cfg.out {
        Some(path) => Some(csvio::Exp1Writer::create(path)?),
        None => None,
    };

    let mut rows = Vec::new();
    for &cell_size in &cells {
        let setup = build_setup(cfg, cell_size)?;
        let m = setup.grid.num_points();
        // One direct solve per grid, reused across every combination.
        let direct = with_pool(cfg.effective_threads(), || {
            solve(
                &setup.grid,
                &setup.time_grid,
                &setup.medium,
                &setup.source,
                &options,
            )
        })??;
        let reference = direct.history.latest_w().to_vec();
        let t_dir_s = direct.stats.total_secs;

        for &order in &orders {
            for &theta in &cfg.thetas {
                let tree = with_pool(cfg.effective_threads(), || {
                    solve_treecode(
                        &setup.grid,
                        &setup.time_grid,
                        &setup.medium,
                        &setup.source,
                        &treecode_params(cfg, theta, order),
                        &options,
                    )
                })??;
                let e_l2 = relative_l2(&reference, tree.history.latest_w())?.relative_l2;
                let row = Exp1Row {
                    m,
                    order,
                    theta,
                    t_dir_s,
                    t_tree_s: tree.stats.total_secs,
                    e_l2,
                };
                if let Some(writer) = writer.as_mut() {
                    writer.write_row(&row)?;
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// One row of the self-convergence study.
#[derive(Debug, Clone)]
pub struct Exp2Row {
    pub order: usize,
    pub level: usize,
    pub ell: f64,
    pub m: usize,
    pub e_l2: f64,
}

/// One per-order series of the self-convergence study.
#[derive(Debug, Clone)]
pub struct Exp2Series {
    pub order: usize,
    pub reference_level: usize,
    pub rows: Vec<Exp2Row>,
    /// Fitted log-log slope of error against cell size.
    pub slope: f64,
}

/// Experiment two: nested-grid self-convergence per interpolation order.
pub fn run_experiment_two(cfg: &RunConfig) -> Result<Vec<Exp2Series>, CliError> {
    let orders = if cfg.orders.is_empty() {
        vec![3, 4, 5]
    } else {
        cfg.orders.clone()
    };
    let theta = single_value(&cfg.thetas, "theta")?;
    let base_grid = build_uniform_grid(1.0 / cfg.base_points_per_side as f64)?;
    let (sigma_t, sigma_s) = medium_fields(&cfg.medium, &base_grid)?;
    let solver = match cfg.solver {
        SolverMode::Direct => SolverChoice::Direct,
        SolverMode::Treecode | SolverMode::Both => SolverChoice::Treecode,
    };
    let mut writer = match &cfg.out {
        Some(path) => Some(csvio::Exp2Writer::create(path)?),
        None => None,
    };

    let mut series = Vec::new();
    for &order in &orders {
        let study = with_pool(cfg.effective_threads(), || {
            convergence_study(&ConvergenceConfig {
                base_points_per_side: cfg.base_points_per_side,
                levels: cfg.levels.clone(),
                solver,
                theta,
                order,
                leaf_capacity: cfg.leaf_capacity,
                plan_memory_budget: cfg.plan_memory_budget,
                sigma_t: sigma_t.clone(),
                sigma_s: sigma_s.clone(),
                source: source_model(cfg.source),
                horizon: cfg.horizon,
            })
        })??;
        let mut rows = Vec::new();
        for row in &study.rows {
            let out_row = Exp2Row {
                order,
                level: row.level,
                ell: row.cell_size,
                m: row.num_points,
                e_l2: row.error_l2,
            };
            if let Some(writer) = writer.as_mut() {
                writer.write_row(&out_row)?;
            }
            rows.push(out_row);
        }
        series.push(Exp2Series {
            order,
            reference_level: study.reference_level,
            rows,
            slope: study.slope,
        });
    }
    Ok(series)
}

/// Checks the configured medium against the well-posedness requirements on
/// the configured grid.
pub fn run_validate(cfg: &RunConfig) -> Result<AssumptionReport, CliError> {
    let cell_size = cfg.single_cell_size()?;
    let grid = build_uniform_grid(cell_size)?;
    let (sigma_t, sigma_s) = medium_fields(&cfg.medium, &grid)?;
    Ok(validate_assumptions(&sigma_t, &sigma_s, &grid))
}
