//! The solution branch `μ ↦ (λ_μ, Λ(μ), E(u_μ))` on the unit disk, its
//! supremum `Λ♯`, and the count of positive critical points at a level `Λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{integrate_profile, RadialProfile, ShootConfig, ShootError, Tolerances};
use crate::par::{map_ordered, Execution};

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
/// Supported peak heights.
pub const MU_MIN: f64 = 1e-3;
pub const MU_MAX: f64 = 30.0;
/// Golden-section stop width in μ.
pub const SHARP_BRACKET_TOL: f64 = 1e-6;
/// Bisection stop width in μ for level crossings.
pub const CROSSING_TOL: f64 = 1e-8;
/// Levels closer than this to `Λ♯` are reported as near-critical.
pub const NEAR_CRITICAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error(transparent)]
    Shoot(#[from] ShootError),
    #[error("mu = {0} outside the supported range [{MU_MIN}, {MU_MAX}]")]
    MuOutOfRange(f64),
    #[error("empty mu grid")]
    EmptyGrid,
    #[error("mu grid must be strictly increasing (violated at index {0})")]
    GridNotIncreasing(usize),
    #[error("need at least 3 solved points to locate the maximum, have {0}")]
    TooFewPoints(usize),
    #[error("bracket failure, extend grid: maximum sits at the grid boundary mu = {0}")]
    BracketFailure(f64),
    #[error("energy level must be positive and finite, got {0}")]
    InvalidLevel(f64),
}

/// One sample of the branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub mu: f64,
    pub log_lambda_mu: f64,
    pub lambda_mu: f64,
    /// `Λ(μ) = ‖u_μ‖²_{H¹₀}`.
    pub dirichlet_energy: f64,
    /// `E(u_μ) = ∫_{B₁} (e^{u_μ²} - 1) dx`.
    pub mt_value: f64,
    pub s_hat: f64,
    pub energy_identity_gap: f64,
    pub step_count: usize,
}

impl From<&RadialProfile> for BranchPoint {
    fn from(p: &RadialProfile) -> Self {
        Self {
            mu: p.mu,
            log_lambda_mu: p.log_lambda_mu,
            lambda_mu: p.lambda_mu(),
            dirichlet_energy: p.dirichlet_energy,
            mt_value: p.mt_value,
            s_hat: p.s_hat,
            energy_identity_gap: p.energy_identity_gap(),
            step_count: p.step_count,
        }
    }
}

fn check_mu(mu: f64) -> Result<(), BranchError> {
    if mu.is_finite() && (MU_MIN..=MU_MAX).contains(&mu) {
        Ok(())
    } else {
        Err(BranchError::MuOutOfRange(mu))
    }
}

/// Solves for the full profile at a supported `μ`.
pub fn solve_profile(mu: f64, tol: &Tolerances) -> Result<RadialProfile, BranchError> {
    check_mu(mu)?;
    Ok(integrate_profile(&ShootConfig::with_tolerances(mu, tol))?)
}

pub fn solve_mu(mu: f64, tol: &Tolerances) -> Result<BranchPoint, BranchError> {
    solve_profile(mu, tol).map(|p| BranchPoint::from(&p))
}

/// Disk value `u_μ(ρ)` for `ρ ∈ [0, 1]`, read off the bubble profile at `r = ρ τ̂`.
pub fn disk_value(profile: &RadialProfile, rho: f64) -> Result<f64, BranchError> {
    Ok(profile.state_at_radius(rho * profile.tau_hat)?.u)
}

/// Log-spaced μ grid with an optional densified window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    pub nodes: usize,
    /// Open window `(lo, hi)` whose intervals are subdivided `densify` times.
    pub dense_window: Option<(f64, f64)>,
    pub densify: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { mu_min: MU_MIN, mu_max: 24.0, nodes: 400, dense_window: Some((0.5, 4.0)), densify: 4 }
    }
}

impl GridSpec {
    pub fn log_spaced(mu_min: f64, mu_max: f64, nodes: usize) -> Self {
        Self { mu_min, mu_max, nodes, dense_window: None, densify: 1 }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let base = log_space(self.mu_min, self.mu_max, self.nodes);
        let Some((lo, hi)) = self.dense_window else { return base };
        if self.densify <= 1 || base.len() < 2 {
            return base;
        }
        let mut out = Vec::with_capacity(base.len() * self.densify);
        for w in base.windows(2) {
            out.push(w[0]);
            if w[0] > lo && w[1] < hi {
                let ratio = (w[1] / w[0]).ln();
                for k in 1..self.densify {
                    out.push(w[0] * (ratio * k as f64 / self.densify as f64).exp());
                }
            }
        }
        out.push(*base.last().unwrap());
        out
    }

    pub fn describe(&self) -> String {
        match self.dense_window {
            Some((lo, hi)) if self.densify > 1 => {
                format!("log-spaced, densified x{} on ({lo}, {hi})", self.densify)
            }
            _ => "log-spaced".to_string(),
        }
    }
}

fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        a
                    } else if i == n - 1 {
                        b
                    } else {
                        (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub mu_min: f64,
    pub mu_max: f64,
    pub nodes: usize,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub mu: f64,
    pub message: String,
}

/// Refined location of the branch maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpEstimate {
    pub mu_sharp: f64,
    pub lambda_sharp: f64,
    pub bracket: (f64, f64),
    pub solves: usize,
    /// More than one interior local maximum on the sampled curve.
    pub multimodal: bool,
}

/// The sampled bifurcation diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCurve {
    pub points: Vec<BranchPoint>,
    pub failures: Vec<NodeFailure>,
    pub grid: GridMeta,
    /// Largest sampled `Λ(μ)` until [`BranchCurve::set_sharp`] replaces it
    /// with a refined value.
    pub lambda_sharp: f64,
    pub mu_sharp: f64,
    pub sharp: Option<SharpEstimate>,
}

impl BranchCurve {
    fn peak_index(&self) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.dirichlet_energy.total_cmp(&b.1.dirichlet_energy))
            .map(|(i, _)| i)
    }

    /// Indices of strict interior local maxima of the sampled `Λ(μ)`.
    pub fn local_maxima(&self) -> Vec<usize> {
        let e: Vec<f64> = self.points.iter().map(|p| p.dirichlet_energy).collect();
        (1..e.len().saturating_sub(1)).filter(|&i| e[i] > e[i - 1] && e[i] > e[i + 1]).collect()
    }

    pub fn set_sharp(&mut self, est: SharpEstimate) {
        self.lambda_sharp = est.lambda_sharp;
        self.mu_sharp = est.mu_sharp;
        self.sharp = Some(est);
    }

    pub fn max_energy_identity_gap(&self) -> f64 {
        self.points.iter().map(|p| p.energy_identity_gap).fold(0.0, f64::max)
    }

    pub fn mu_window(&self) -> (f64, f64) {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => (a.mu, b.mu),
            _ => (f64::NAN, f64::NAN),
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), BranchError> {
    if grid.is_empty() {
        return Err(BranchError::EmptyGrid);
    }
    for (i, &mu) in grid.iter().enumerate() {
        check_mu(mu)?;
        if i > 0 && mu <= grid[i - 1] {
            return Err(BranchError::GridNotIncreasing(i));
        }
    }
    Ok(())
}

/// Solves every grid node; failed nodes are recorded rather than fatal.
pub fn sweep_branch(grid: &[f64], tol: &Tolerances, exec: Execution) -> Result<BranchCurve, BranchError> {
    sweep_with_rule(grid, tol, exec, "explicit")
}

pub fn sweep_spec(spec: &GridSpec, tol: &Tolerances, exec: Execution) -> Result<BranchCurve, BranchError> {
    sweep_with_rule(&spec.nodes(), tol, exec, &spec.describe())
}

fn sweep_with_rule(grid: &[f64], tol: &Tolerances, exec: Execution, rule: &str) -> Result<BranchCurve, BranchError> {
    check_grid(grid)?;
    let results = map_ordered(grid, exec, |&mu| solve_mu(mu, tol));
    let mut points = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for (&mu, res) in grid.iter().zip(results) {
        match res {
            Ok(p) => points.push(p),
            Err(e) => failures.push(NodeFailure { mu, message: e.to_string() }),
        }
    }
    let mut curve = BranchCurve {
        points,
        failures,
        grid: GridMeta { mu_min: grid[0], mu_max: grid[grid.len() - 1], nodes: grid.len(), rule: rule.to_string() },
        lambda_sharp: f64::NAN,
        mu_sharp: f64::NAN,
        sharp: None,
    };
    if let Some(i) = curve.peak_index() {
        curve.lambda_sharp = curve.points[i].dirichlet_energy;
        curve.mu_sharp = curve.points[i].mu;
    }
    Ok(curve)
}

/// Golden-section refinement of `μ ↦ Λ(μ)` around the best sampled node,
/// with fresh solves at every probe.
pub fn find_lambda_sharp(curve: &BranchCurve, tol: &Tolerances) -> Result<SharpEstimate, BranchError> {
    let n = curve.points.len();
    if n < 3 {
        return Err(BranchError::TooFewPoints(n));
    }
    let best = curve.peak_index().expect("non-empty");
    if best == 0 || best == n - 1 {
        return Err(BranchError::BracketFailure(curve.points[best].mu));
    }
    let multimodal = curve.local_maxima().len() > 1;
    let energy = |mu: f64| solve_mu(mu, tol).map(|p| p.dirichlet_energy);

    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (curve.points[best - 1].mu, curve.points[best + 1].mu);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (energy(c)?, energy(d)?);
    let mut solves = 2;
    let mut best_probe = if fc >= fd { (c, fc) } else { (d, fd) };
    while b - a >= SHARP_BRACKET_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = energy(c)?;
            if fc > best_probe.1 {
                best_probe = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = energy(d)?;
            if fd > best_probe.1 {
                best_probe = (d, fd);
            }
        }
        solves += 1;
    }
    let mid = 0.5 * (a + b);
    let f_mid = energy(mid)?;
    solves += 1;
    // The midpoint is the answer unless a probe or the seed node did strictly better.
    let node = (curve.points[best].mu, curve.points[best].dirichlet_energy);
    let (mu_sharp, lambda_sharp) =
        [best_probe, node].into_iter().fold((mid, f_mid), |acc, cand| if cand.1 > acc.1 { cand } else { acc });
    Ok(SharpEstimate { mu_sharp, lambda_sharp, bracket: (a, b), solves, multimodal })
}

/// Where a level sits relative to `4π` and `Λ♯`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "below 4pi")]
    BelowFourPi,
    #[serde(rename = "supercritical window")]
    SupercriticalWindow,
    #[serde(rename = "above Lambda_sharp")]
    AboveLambdaSharp,
}

impl Regime {
    pub fn classify(level: f64, lambda_sharp: f64) -> Self {
        if level <= FOUR_PI {
            Regime::BelowFourPi
        } else if level <= lambda_sharp {
            Regime::SupercriticalWindow
        } else {
            Regime::AboveLambdaSharp
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::BelowFourPi => "below 4pi",
            Regime::SupercriticalWindow => "supercritical window",
            Regime::AboveLambdaSharp => "above Lambda_sharp",
        }
    }
}

/// Observed level crossings of the sampled branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub level: f64,
    pub regime: Regime,
    /// μ values with `Λ(μ) = level`, each a positive critical point.
    pub crossings: Vec<f64>,
    /// The μ-window searched; counts say nothing outside it.
    pub mu_window: (f64, f64),
    pub lambda_sharp: f64,
    pub warning: Option<String>,
}

impl CountReport {
    pub fn observed_count(&self) -> usize {
        self.crossings.len()
    }
}

/// Brackets every sign change of `Λ(μ) - level` on the curve and bisects
/// each with fresh solves.
pub fn count_solutions(level: f64, curve: &BranchCurve, tol: &Tolerances) -> Result<CountReport, BranchError> {
    if !(level.is_finite() && level > 0.0) {
        return Err(BranchError::InvalidLevel(level));
    }
    if curve.points.is_empty() {
        return Err(BranchError::EmptyGrid);
    }
    let lambda_sharp = curve.lambda_sharp;
    let warning = ((level - lambda_sharp).abs() < NEAR_CRITICAL_TOL).then(|| {
        format!("near-critical level, count unreliable: |Lambda - Lambda_sharp| = {:e}", (level - lambda_sharp).abs())
    });

    let mut crossings = Vec::new();
    let pts = &curve.points;
    if pts[0].dirichlet_energy == level {
        crossings.push(pts[0].mu);
    }
    for w in pts.windows(2) {
        let (d0, d1) = (w[0].dirichlet_energy - level, w[1].dirichlet_energy - level);
        if d1 == 0.0 {
            crossings.push(w[1].mu);
            continue;
        }
        if d0 == 0.0 || d0.signum() == d1.signum() {
            continue;
        }
        let (mut lo, mut hi) = (w[0].mu, w[1].mu);
        let rising = d0 < 0.0;
        while hi - lo > CROSSING_TOL {
            let mid = 0.5 * (lo + hi);
            let dm = solve_mu(mid, tol)?.dirichlet_energy - level;
            if dm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (dm < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(0.5 * (lo + hi));
    }

    Ok(CountReport {
        level,
        regime: Regime::classify(level, lambda_sharp),
        crossings,
        mu_window: curve.mu_window(),
        lambda_sharp,
        warning,
    })
}
