//! Run configuration: a flat `key = value` file with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rte_core::RteError;

/// Harness errors, split by exit code: configuration problems exit with 1,
/// numerical failures (assumption or contraction violations, divergent
/// iterations) with 2.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<RteError> for CliError {
    fn from(err: RteError) -> Self {
        match err {
            RteError::AssumptionViolated(_)
            | RteError::ContractionViolated { .. }
            | RteError::NoConvergence(_) => CliError::Numerical(err.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {err}"))
    }
}

/// Which evaluator(s) a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Direct,
    Treecode,
    Both,
}

impl SolverMode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(SolverMode::Direct),
            "treecode" | "tree" => Ok(SolverMode::Treecode),
            "both" => Ok(SolverMode::Both),
            other => Err(CliError::Config(format!(
                "unknown solver '{other}' (expected direct, treecode, or both)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::Direct => "direct",
            SolverMode::Treecode => "treecode",
            SolverMode::Both => "both",
        }
    }
}

/// Medium selection: constant coefficients or a grid-sampled CSV file.
#[derive(Debug, Clone)]
pub enum MediumSpec {
    Constant { sigma_t: f64, sigma_s: f64 },
    Csv(PathBuf),
}

/// Source selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSpec {
    Benchmark,
    Zero,
}

impl SourceSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benchmark" => Ok(SourceSpec::Benchmark),
            "zero" => Ok(SourceSpec::Zero),
            other => Err(CliError::Config(format!(
                "unknown source '{other}' (expected benchmark or zero)"
            ))),
        }
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Cell sizes, from `ell`; exclusive with `M`.
    pub cell_sizes: Vec<f64>,
    /// Collocation point counts, from `M`; each must be a perfect square.
    pub m_values: Vec<usize>,
    /// Time step `h`; defaults to the cell size.
    pub step: Option<f64>,
    /// Final time `T`.
    pub horizon: f64,
    pub medium: MediumSpec,
    pub source: SourceSpec,
    pub solver: SolverMode,
    pub thetas: Vec<f64>,
    pub orders: Vec<usize>,
    pub leaf_capacity: usize,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Allow `h > ell` via Jacobi iteration (direct solver only).
    pub iterative: bool,
    pub keep_all_levels: bool,
    /// Precompute the dense pair attenuation cache (variable media).
    pub precompute_attenuation: bool,
    /// Byte budget for treecode interaction-plan caches.
    pub plan_memory_budget: usize,
    /// Nested-grid family levels for the convergence study.
    pub levels: Vec<usize>,
    /// Cells per side of the coarsest family member.
    pub base_points_per_side: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cell_sizes: Vec::new(),
            m_values: Vec::new(),
            step: None,
            horizon: 1.0,
            medium: MediumSpec::Constant {
                sigma_t: 5.2,
                sigma_s: 5.0,
            },
            source: SourceSpec::Benchmark,
            solver: SolverMode::Both,
            thetas: vec![0.3],
            orders: Vec::new(),
            leaf_capacity: 64,
            deterministic: true,
            threads: None,
            out: None,
            iterative: false,
            keep_all_levels: false,
            precompute_attenuation: false,
            plan_memory_budget: 1 << 30,
            levels: vec![1, 2, 3, 4],
            base_points_per_side: 24,
        }
    }
}

impl RunConfig {
    /// The single cell size of this run; errors when the config describes a
    /// sweep rather than one grid.
    pub fn single_cell_size(&self) -> Result<f64, CliError> {
        match (self.cell_sizes.as_slice(), self.m_values.as_slice()) {
            ([ell], []) => Ok(*ell),
            ([], [m]) => Ok(1.0 / (*m as f64).sqrt()),
            ([], []) => Err(CliError::Config("no grid given: set M or ell".into())),
            _ => Err(CliError::Config(
                "this subcommand needs exactly one M or ell value".into(),
            )),
        }
    }

    /// Cell sizes of an experiment sweep, one per requested grid.
    pub fn sweep_cell_sizes(&self) -> Result<Vec<f64>, CliError> {
        if !self.cell_sizes.is_empty() && !self.m_values.is_empty() {
            return Err(CliError::Config("give either M or ell, not both".into()));
        }
        if !self.cell_sizes.is_empty() {
            return Ok(self.cell_sizes.clone());
        }
        if self.m_values.is_empty() {
            return Err(CliError::Config("no grids given: set M or ell".into()));
        }
        Ok(self
            .m_values
            .iter()
            .map(|&m| 1.0 / (m as f64).sqrt())
            .collect())
    }

    /// Effective thread count: flag/config, then `RTE_THREADS`, then the
    /// library default.
    pub fn effective_threads(&self) -> Option<usize> {
        self.threads.or_else(|| {
            std::env::var("RTE_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
    }
}

/// Raw key-value pairs from a config file plus overrides, before
/// validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses a flat config file: one `key = value` per line, `#` comments.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            raw.set(key.trim(), value.trim());
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    /// Validates and resolves into a [`RunConfig`].
    pub fn build(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();

        if let Some(v) = self.get("ell") {
            cfg.cell_sizes = parse_list(v, "ell")?;
        }
        if let Some(v) = self.get("M") {
            cfg.m_values = parse_list(v, "M")?;
            for &m in &cfg.m_values {
                let side = (m as f64).sqrt().round() as usize;
                if side * side != m {
                    return Err(CliError::Config(format!(
                        "M = {m} is not a perfect square; nearest is {}",
                        side * side
                    )));
                }
            }
        }
        if !cfg.cell_sizes.is_empty() && !cfg.m_values.is_empty() {
            return Err(CliError::Config("give either M or ell, not both".into()));
        }
        if let Some(v) = self.get("step") {
            cfg.step = Some(parse_one(v, "step")?);
        }
        if let Some(v) = self.get("horizon") {
            cfg.horizon = parse_one(v, "horizon")?;
        }
        if cfg.horizon <= 0.0 {
            return Err(CliError::Config(format!(
                "horizon must be positive, got {}",
                cfg.horizon
            )));
        }

        let sigma_t = self.get("sigma_t").map(|v| parse_one(v, "sigma_t")).transpose()?;
        let sigma_s = self.get("sigma_s").map(|v| parse_one(v, "sigma_s")).transpose()?;
        cfg.medium = match self.get("medium_csv") {
            Some(path) => {
                if sigma_t.is_some() || sigma_s.is_some() {
                    return Err(CliError::Config(
                        "medium_csv conflicts with constant sigma_t/sigma_s".into(),
                    ));
                }
                MediumSpec::Csv(PathBuf::from(path))
            }
            None => MediumSpec::Constant {
                sigma_t: sigma_t.unwrap_or(5.2),
                sigma_s: sigma_s.unwrap_or(5.0),
            },
        };

        if let Some(v) = self.get("source") {
            cfg.source = SourceSpec::parse(v)?;
        }
        if let Some(v) = self.get("solver") {
            cfg.solver = SolverMode::parse(v)?;
        }
        if let Some(v) = self.get("theta") {
            cfg.thetas = parse_list(v, "theta")?;
        }
        for &theta in &cfg.thetas {
            if !(0.0..1.0).contains(&theta) {
                return Err(CliError::Config(format!(
                    "theta must lie in [0, 1), got {theta}"
                )));
            }
        }
        if let Some(v) = self.get("cheb_order") {
            cfg.orders = parse_list(v, "cheb_order")?;
        }
        for &n in &cfg.orders {
            if n < 2 {
                return Err(CliError::Config(format!(
                    "cheb_order must be at least 2, got {n}"
                )));
            }
        }
        if let Some(v) = self.get("leaf_cap") {
            cfg.leaf_capacity = parse_one(v, "leaf_cap")?;
            if cfg.leaf_capacity == 0 {
                return Err(CliError::Config("leaf_cap must be at least 1".into()));
            }
        }
        if let Some(v) = self.get("deterministic") {
            cfg.deterministic = parse_bool(v, "deterministic")?;
        }
        if let Some(v) = self.get("threads") {
            cfg.threads = Some(parse_one(v, "threads")?);
        }
        if let Some(v) = self.get("out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some(v) = self.get("iterative") {
            cfg.iterative = parse_bool(v, "iterative")?;
        }
        if let Some(v) = self.get("keep_all") {
            cfg.keep_all_levels = parse_bool(v, "keep_all")?;
        }
        if let Some(v) = self.get("precompute_attenuation") {
            cfg.precompute_attenuation = parse_bool(v, "precompute_attenuation")?;
        }
        if let Some(v) = self.get("plan_budget") {
            cfg.plan_memory_budget = parse_one(v, "plan_budget")?;
        }
        if let Some(v) = self.get("levels") {
            cfg.levels = parse_list(v, "levels")?;
            if cfg.levels.contains(&0) {
                return Err(CliError::Config("levels are 1-based".into()));
            }
        }
        if let Some(v) = self.get("base") {
            cfg.base_points_per_side = parse_one(v, "base")?;
        }

        // h <= ell unless iterative mode is on; checkable only when a single
        // grid is described.
        if let (Some(h), Ok(ell)) = (cfg.step, cfg.single_cell_size()) {
            if h > ell * (1.0 + 1e-12) && !cfg.iterative {
                return Err(CliError::Config(format!(
                    "step {h} exceeds cell size {ell}; set iterative = true for Jacobi mode"
                )));
            }
        }
        Ok(cfg)
    }
}

fn parse_one<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| CliError::Config(format!("bad {key} '{value}': {e}")))
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    let items: Result<Vec<T>, CliError> = value
        .split(',')
        .map(|part| parse_one(part, key))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key} list is empty")));
    }
    Ok(items)
}

fn parse_bool(value: &str, key: &str) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(CliError::Config(format!("bad {key} '{other}'"))),
    }
}
