//! `rte` — time-dependent radiative transport solver on the unit square.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rte_cli::config::{CliError, RawConfig, RunConfig};
use rte_cli::drivers;

#[derive(Parser)]
#[command(
    name = "rte",
    about = "Time-dependent radiative transport solver: retarded-time volume \
             integral formulation with direct and treecode evaluators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and dump the final-time solution
    Solve(CommonArgs),
    /// Timing/accuracy sweep: direct solver vs treecode over M, n, theta
    Exp1(CommonArgs),
    /// Nested-grid self-convergence study
    Exp2(CommonArgs),
    /// Check the medium against the well-posedness assumptions
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; command-line flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of collocation points (perfect square); comma list for sweeps
    #[arg(long = "M", value_name = "M")]
    m: Option<String>,
    /// Cell size 1/m; comma list for sweeps (alternative to --M)
    #[arg(long)]
    ell: Option<String>,
    /// Time step h (default: the cell size)
    #[arg(long)]
    step: Option<f64>,
    /// Final time T (default 1)
    #[arg(long)]
    horizon: Option<f64>,
    /// Constant total coefficient sigma_t (default 5.2)
    #[arg(long = "sigma-t")]
    sigma_t: Option<f64>,
    /// Constant scattering coefficient sigma_s (default 5.0)
    #[arg(long = "sigma-s")]
    sigma_s: Option<f64>,
    /// Grid-sampled medium CSV with header i,j,sigma_t,sigma_s
    #[arg(long = "medium-csv")]
    medium_csv: Option<PathBuf>,
    /// Source preset: benchmark | zero
    #[arg(long)]
    source: Option<String>,
    /// Solver: direct | treecode | both
    #[arg(long)]
    solver: Option<String>,
    /// Multipole acceptance parameter in [0,1); comma list for sweeps
    #[arg(long)]
    theta: Option<String>,
    /// Chebyshev interpolation order >= 2; comma list for sweeps
    #[arg(long = "cheb-order")]
    cheb_order: Option<String>,
    /// Maximum points per kd-tree leaf
    #[arg(long = "leaf-cap")]
    leaf_cap: Option<usize>,
    /// Output file path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: RTE_THREADS or all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Force deterministic ordered accumulation (on by default)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<bool>,
    /// Allow h > ell via Jacobi iteration (direct solver only)
    #[arg(long)]
    iterative: bool,
    /// Retain and dump every time level, not just the final one
    #[arg(long = "keep-all")]
    keep_all: bool,
    /// Precompute the dense pair-attenuation cache (variable media)
    #[arg(long = "precompute-attenuation")]
    precompute_attenuation: bool,
    /// Nested-grid family levels for exp2, e.g. 1,2,3,4
    #[arg(long)]
    levels: Option<String>,
    /// Cells per side of the coarsest family member for exp2 (default 24)
    #[arg(long)]
    base: Option<usize>,
    /// Byte budget for treecode interaction-plan caches
    #[arg(long = "plan-budget")]
    plan_budget: Option<usize>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        if let Some(v) = &self.m {
            raw.set("M", v);
        }
        if let Some(v) = &self.ell {
            raw.set("ell", v);
        }
        if let Some(v) = self.step {
            raw.set("step", &v.to_string());
        }
        if let Some(v) = self.horizon {
            raw.set("horizon", &v.to_string());
        }
        if let Some(v) = self.sigma_t {
            raw.set("sigma_t", &v.to_string());
        }
        if let Some(v) = self.sigma_s {
            raw.set("sigma_s", &v.to_string());
        }
        if let Some(v) = &self.medium_csv {
            raw.set("medium_csv", &v.display().to_string());
        }
        if let Some(v) = &self.source {
            raw.set("source", v);
        }
        if let Some(v) = &self.solver {
            raw.set("solver", v);
        }
        if let Some(v) = &self.theta {
            raw.set("theta", v);
        }
        if let Some(v) = &self.cheb_order {
            raw.set("cheb_order", v);
        }
        if let Some(v) = self.leaf_cap {
            raw.set("leaf_cap", &v.to_string());
        }
        if let Some(v) = &self.out {
            raw.set("out", &v.display().to_string());
        }
        if let Some(v) = self.threads {
            raw.set("threads", &v.to_string());
        }
        if let Some(v) = self.deterministic {
            raw.set("deterministic", &v.to_string());
        }
        if self.iterative {
            raw.set("iterative", "true");
        }
        if self.keep_all {
            raw.set("keep_all", "true");
        }
        if self.precompute_attenuation {
            raw.set("precompute_attenuation", "true");
        }
        if let Some(v) = &self.levels {
            raw.set("levels", v);
        }
        if let Some(v) = self.base {
            raw.set("base", &v.to_string());
        }
        if let Some(v) = self.plan_budget {
            raw.set("plan_budget", &v.to_string());
        }
        raw.build()
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            let outcome = drivers::run_single(&cfg)?;
            if let Some(stats) = &outcome.direct_stats {
                println!("direct:   {:.3} s total", stats.total_secs);
            }
            if let Some(stats) = &outcome.treecode_stats {
                println!("treecode: {:.3} s total", stats.total_secs);
            }
            if let Some(report) = &outcome.error_report {
                println!(
                    "E_l2(direct, treecode) = {:.6e}  (max abs {:.6e} over {} points)",
                    report.relative_l2, report.max_abs_diff, report.count
                );
            }
            println!("max final-time value: {:.6e}", outcome.final_max);
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Exp1(args) => {
            let cfg = args.resolve()?;
            let rows = drivers::run_experiment_one(&cfg)?;
            println!("M,n,theta,t_dir_s,t_tree_s,E_l2");
            for row in &rows {
                println!(
                    "{},{},{},{:.4},{:.4},{:.6e}",
                    row.m, row.order, row.theta, row.t_dir_s, row.t_tree_s, row.e_l2
                );
            }
            if let Some(out) = &cfg.out {
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Exp2(args) => {
            let cfg = args.resolve()?;
            let series = drivers::run_experiment_two(&cfg)?;
            println!("n,level,ell,M,E_l2");
            for s in &series {
                for row in &s.rows {
                    println!(
                        "{},{},{},{},{:.6e}",
                        row.order, row.level, row.ell, row.m, row.e_l2
                    );
                }
                println!(
                    "# order {}: slope {:.3} against reference level {}",
                    s.order, s.slope, s.reference_level
                );
            }
            if let Some(out) = &cfg.out {
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = args.resolve()?;
            let report = drivers::run_validate(&cfg)?;
            println!("{report}");
            if report.pass {
                Ok(())
            } else {
                Err(CliError::Numerical(
                    report
                        .failure
                        .unwrap_or_else(|| "assumption check failed".into()),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ CliError::Config(_)) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
        Err(err @ CliError::Numerical(_)) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
