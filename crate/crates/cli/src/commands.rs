//! Subcommand bodies. Each one computes everything first and returns the
//! files to write plus the lines to print; writing happens afterwards in
//! one sequential pass.

use std::path::PathBuf;

use anyhow::{Context, Result};
use mtbranch::asymptotics::bubble::find_r0;
use mtbranch::asymptotics::{check_report, decompose, geometric_grid, quantization_profile};
use mtbranch::branch::{count_solutions, find_lambda_sharp, solve_profile, sweep_spec, BranchPoint};
use mtbranch::export::{branch_csv, branch_summary, decomposition_csv, profile_csv, quantization_csv, CountSummary};
use mtbranch::{BranchCurve, FOUR_PI};
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Dense samples per accepted step in the profile table.
const PROFILE_SAMPLES_PER_STEP: usize = 4;
/// Outer radius of the decomposition comparison.
const DECOMPOSITION_R: f64 = 5.0;
const QUANTIZATION_POINTS: usize = 60;
const QUANTIZATION_R_MIN: f64 = 1e-2;

/// Files to write and text to print.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(PathBuf, String)>,
    pub stdout: Vec<String>,
    /// Set when results are complete but some samples failed.
    pub partial_failure: Option<String>,
}

impl Output {
    fn file(&mut self, cfg: &RunConfig, name: &str, contents: String) {
        self.files.push((cfg.out.join(name), contents));
    }

    fn json<T: Serialize>(&mut self, cfg: &RunConfig, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.file(cfg, name, text);
        Ok(())
    }
}

#[derive(Serialize)]
struct SolveSummary {
    mu: f64,
    lambda_mu: f64,
    log_lambda_mu: f64,
    #[serde(rename = "Lambda")]
    dirichlet_energy: f64,
    #[serde(rename = "E_value")]
    mt_value: f64,
    s_hat: f64,
    tau_hat: f64,
    nonlinear_mass: f64,
    energy_identity_gap: f64,
    steps: usize,
    rejected_steps: usize,
    rel_tol: f64,
    abs_tol: f64,
}

fn require_mu(cfg: &RunConfig) -> f64 {
    cfg.mu.expect("subcommands that need mu get a default")
}

pub fn solve(cfg: &RunConfig) -> Result<Output> {
    let mu = require_mu(cfg);
    let p = solve_profile(mu, &cfg.tol).with_context(|| format!("solve at mu = {mu}"))?;
    let point = BranchPoint::from(&p);
    let mut out = Output::default();
    if cfg.format == Format::Csv {
        out.file(cfg, "profile.csv", profile_csv(&p, PROFILE_SAMPLES_PER_STEP));
    }
    out.json(
        cfg,
        "solve.json",
        &SolveSummary {
            mu,
            lambda_mu: point.lambda_mu,
            log_lambda_mu: point.log_lambda_mu,
            dirichlet_energy: point.dirichlet_energy,
            mt_value: point.mt_value,
            s_hat: p.s_hat,
            tau_hat: p.tau_hat,
            nonlinear_mass: p.nonlinear_mass,
            energy_identity_gap: point.energy_identity_gap,
            steps: p.step_count,
            rejected_steps: p.rejected_steps,
            rel_tol: cfg.tol.rel_tol,
            abs_tol: cfg.tol.abs_tol,
        },
    )?;
    out.stdout.push(format!("mu = {mu}  lambda_mu = {}  Lambda = {}", point.lambda_mu, point.dirichlet_energy));
    Ok(out)
}

fn sweep_curve(cfg: &RunConfig) -> Result<BranchCurve> {
    Ok(sweep_spec(&cfg.grid, &cfg.tol, cfg.execution())?)
}

fn failure_note(curve: &BranchCurve) -> Option<String> {
    (!curve.failures.is_empty()).then(|| {
        let first = &curve.failures[0];
        format!("{} grid nodes failed (first at mu = {}: {})", curve.failures.len(), first.mu, first.message)
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Output> {
    let curve = sweep_curve(cfg)?;
    let mut out = Output::default();
    if cfg.format == Format::Csv {
        out.file(cfg, "branch.csv", branch_csv(&curve.points));
    }
    out.json(cfg, "branch.json", &branch_summary(&curve))?;
    out.stdout.push(format!(
        "{} nodes solved on [{}, {}]; sampled max Lambda = {} at mu = {}",
        curve.points.len(),
        cfg.grid.mu_min,
        cfg.grid.mu_max,
        curve.lambda_sharp,
        curve.mu_sharp
    ));
    out.partial_failure = failure_note(&curve);
    Ok(out)
}

fn refined_curve(cfg: &RunConfig) -> Result<BranchCurve> {
    let mut curve = sweep_curve(cfg)?;
    let est = find_lambda_sharp(&curve, &cfg.tol)?;
    curve.set_sharp(est);
    Ok(curve)
}

pub fn sharp(cfg: &RunConfig) -> Result<Output> {
    let curve = refined_curve(cfg)?;
    let summary = branch_summary(&curve);
    let mut out = Output::default();
    if cfg.format == Format::Csv {
        out.file(cfg, "branch.csv", branch_csv(&curve.points));
    }
    out.json(cfg, "sharp.json", &summary)?;
    out.stdout.push(format!("Lambda_sharp = {}", summary.lambda_sharp));
    out.stdout.push(format!("mu_sharp = {}", summary.mu_sharp));
    out.stdout.push(format!("four_pi = {FOUR_PI}"));
    out.stdout.push(format!("margin = {}", summary.margin));
    if summary.multimodal {
        out.stdout.push(format!("note: sampled curve has {} local maxima", summary.local_maxima));
    }
    out.partial_failure = failure_note(&curve);
    Ok(out)
}

pub fn count(cfg: &RunConfig) -> Result<Output> {
    let level = cfg.level.expect("validated before dispatch");
    let curve = refined_curve(cfg)?;
    let report = count_solutions(level, &curve, &cfg.tol)?;
    let summary = CountSummary::from(&report);
    let mut out = Output::default();
    out.json(cfg, "count.json", &summary)?;
    let list: Vec<String> = summary.crossings.iter().map(|m| m.to_string()).collect();
    out.stdout.push(format!("regime: {}", summary.regime));
    out.stdout.push(format!(
        "observed crossings ({}) on mu in [{}, {}]: [{}]",
        summary.observed_count,
        summary.mu_window.0,
        summary.mu_window.1,
        list.join(", ")
    ));
    if let Some(w) = &summary.warning {
        out.stdout.push(format!("warning: {w}"));
    }
    out.partial_failure = failure_note(&curve);
    Ok(out)
}

pub fn asym(cfg: &RunConfig) -> Result<Output> {
    let mu = require_mu(cfg);
    let p = solve_profile(mu, &cfg.tol).with_context(|| format!("solve at mu = {mu}"))?;
    let r_cmp = DECOMPOSITION_R.min(p.tau_hat);
    let report = check_report(&p, r_cmp)?;
    let mut out = Output::default();
    if cfg.format == Format::Csv {
        let dec = decompose(&p, r_cmp)?;
        let r_hi = cfg.r_max.min(p.tau_hat);
        let grid = geometric_grid(QUANTIZATION_R_MIN.min(r_hi), r_hi, QUANTIZATION_POINTS);
        let q = quantization_profile(&p, &grid)?;
        out.file(cfg, "decomposition.csv", decomposition_csv(&dec));
        out.file(cfg, "quantization.csv", quantization_csv(&q));
    }
    out.json(cfg, "asym.json", &report)?;
    out.stdout.push(format!(
        "mu = {mu}  sup|w_num - w| = {}  decay_ok = {}  density_ok = {}  R0 = {}",
        report.sup_err_w,
        report.decay_ok,
        report.density_ok,
        find_r0()?
    ));
    if let Some(w) = &report.warning {
        out.stdout.push(format!("warning: {w}"));
    }
    Ok(out)
}
