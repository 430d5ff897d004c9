//! Run configuration: command-line flags layered over an optional
//! `key = value` file layered over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mtbranch::branch::{GridSpec, MU_MAX, MU_MIN};
use mtbranch::ode::{DEFAULT_ABS_TOL, DEFAULT_MAX_STEPS, DEFAULT_REL_TOL, DEFAULT_ZERO_TOL};
use mtbranch::{Execution, Tolerances};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MT_BRANCH_SEED_DIR";
pub const DEFAULT_OUT_DIR: &str = "mt-branch-out";

pub const DEFAULT_SOLVE_MU: f64 = 1.0;
pub const DEFAULT_ASYM_MU: f64 = 16.0;
pub const DEFAULT_R_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Data tables as CSV plus a JSON summary.
    Csv,
    /// JSON summary only.
    Json,
}

/// Flags shared by every subcommand. Each one is optional so that a config
/// file value can fill in when the flag is absent.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Peak height u(0).
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long = "mu-min", allow_negative_numbers = true)]
    pub mu_min: Option<f64>,
    #[arg(long = "mu-max", allow_negative_numbers = true)]
    pub mu_max: Option<f64>,
    /// Number of log-spaced base nodes of the sweep grid.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Dirichlet energy level for `count`.
    #[arg(long = "Lambda", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Outer radius of the quantization grid for `asym`.
    #[arg(long = "R-max", allow_negative_numbers = true)]
    pub r_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps; 1 runs sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol")]
    pub abs_tol: Option<f64>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mu: Option<f64>,
    pub grid: GridSpec,
    pub level: Option<f64>,
    pub r_max: f64,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
    pub tol: Tolerances,
}

impl RunConfig {
    pub fn execution(&self) -> Execution {
        Execution::from_jobs(self.jobs)
    }
}

const KEYS: [&str; 11] =
    ["mu", "mu_min", "mu_max", "nodes", "Lambda", "R_max", "out", "format", "jobs", "rel_tol", "abs_tol"];

/// Parses the flat config format. Blank lines and `#` comments are
/// ignored; keys may use `-` or `_`; repeated or unknown keys are errors.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key `{}`", n + 1, k.trim()));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key `{key}`", n + 1));
        }
    }
    Ok(map)
}

fn file_value<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String> {
    file.get(key).map(|v| v.parse::<T>().map_err(|_| format!("config key `{key}`: cannot parse `{v}`"))).transpose()
}

fn check_mu(name: &str, mu: f64) -> Result<(), String> {
    if mu.is_finite() && (MU_MIN..=MU_MAX).contains(&mu) {
        Ok(())
    } else {
        Err(format!("{name} = {mu} outside [{MU_MIN}, {MU_MAX}]"))
    }
}

fn check_positive(name: &str, x: f64) -> Result<(), String> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {x}"))
    }
}

/// Merges flags, config file and defaults, then validates. Every error is
/// a usage error.
pub fn resolve(args: &RunArgs, default_mu: Option<f64>) -> Result<RunConfig, String> {
    let file = match &args.config {
        Some(path) => parse_config_file(&read(path)?)?,
        None => BTreeMap::new(),
    };
    let format = match (args.format, file.get("format").map(String::as_str)) {
        (Some(f), _) => f,
        (None, Some(s)) => Format::from_str(s, true).map_err(|_| format!("config key `format`: unknown `{s}`"))?,
        (None, None) => Format::Csv,
    };
    let out = args
        .out
        .clone()
        .or(file_value::<PathBuf>(&file, "out")?)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let defaults = GridSpec::default();
    let mu = args.mu.or(file_value(&file, "mu")?).or(default_mu);
    let mu_min = args.mu_min.or(file_value(&file, "mu_min")?).unwrap_or(defaults.mu_min);
    let mu_max = args.mu_max.or(file_value(&file, "mu_max")?).unwrap_or(defaults.mu_max);
    let nodes = args.nodes.or(file_value(&file, "nodes")?).unwrap_or(defaults.nodes);
    let level = args.lambda.or(file_value(&file, "Lambda")?);
    let r_max = args.r_max.or(file_value(&file, "R_max")?).unwrap_or(DEFAULT_R_MAX);
    let jobs = args.jobs.or(file_value(&file, "jobs")?);
    let rel_tol = args.rel_tol.or(file_value(&file, "rel_tol")?).unwrap_or(DEFAULT_REL_TOL);
    let abs_tol = args.abs_tol.or(file_value(&file, "abs_tol")?).unwrap_or(DEFAULT_ABS_TOL);

    if let Some(mu) = mu {
        check_mu("mu", mu)?;
    }
    check_mu("mu_min", mu_min)?;
    check_mu("mu_max", mu_max)?;
    if mu_min >= mu_max {
        return Err(format!("mu_min = {mu_min} must be below mu_max = {mu_max}"));
    }
    if nodes < 3 {
        return Err(format!("nodes must be at least 3, got {nodes}"));
    }
    if let Some(level) = level {
        check_positive("Lambda", level)?;
    }
    check_positive("R_max", r_max)?;
    if jobs == Some(0) {
        return Err("jobs must be at least 1".into());
    }
    for (name, t) in [("rel_tol", rel_tol), ("abs_tol", abs_tol)] {
        check_positive(name, t)?;
        if t >= 1e-2 {
            return Err(format!("{name} = {t} is too loose (must be below 1e-2)"));
        }
    }

    Ok(RunConfig {
        mu,
        grid: GridSpec { mu_min, mu_max, nodes, ..defaults },
        level,
        r_max,
        out,
        format,
        jobs,
        tol: Tolerances { rel_tol, abs_tol, zero_tol: DEFAULT_ZERO_TOL, max_steps: DEFAULT_MAX_STEPS },
    })
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))
}
