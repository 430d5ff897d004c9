//! Radial shooting in bubble-normalized, log-radius coordinates.
//!
//! With `s = log r` and the normalization `λ* = 4 / (μ² e^{μ²})` the radial
//! equation `-u'' - u'/r = λ u e^{u²}` becomes
//!
//! ```text
//! u_ss = -e^{2s} g(u),    g(u) = (4u/μ²) exp(u² - μ²),
//! ```
//!
//! which is integrated from a series start near the origin up to the first
//! zero `ŝ`. The disk solution is recovered by the dilation `r -> r / τ̂`,
//! so `λ_μ = λ* τ̂²`.

pub mod dopri;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use self::dopri::{integrate, DenseSegment, StepControl, StepFailure};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: usize = 500_000;
/// Largest start radius used when the series remainder allows it.
pub const DEFAULT_START_RADIUS: f64 = 1e-4;

/// State layout: `[u, u_s, ∫u_s² ds, ∫u g(u) e^{2s} ds, ∫(e^{u²}-1) e^{2s-μ²} ds]`.
pub(crate) const DIM: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootError {
    #[error("invalid shooting configuration: {0}")]
    InvalidConfig(String),
    #[error("start radius too large: series remainder {remainder:e} exceeds abs_tol {abs_tol:e}")]
    StartRadiusTooLarge { remainder: f64, abs_tol: f64 },
    #[error("no zero before s_max = {s_max} (stopped at s = {s_reached} after {steps} steps)")]
    NoZero { s_max: f64, s_reached: f64, steps: usize },
    #[error("integration blew up near s = {s}")]
    BlewUp { s: f64 },
    #[error("log-radius {s} outside the solved range [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },
}

/// Numerical controls for one shooting solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub mu: f64,
    pub s_start: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub zero_tol: f64,
    pub s_max: f64,
}

/// Tolerances shared by every solve of a sweep; the per-μ start radius and
/// cap are derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub zero_tol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            zero_tol: DEFAULT_ZERO_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Coefficient of `r⁴` in the expansion of `u` about the origin.
pub fn quartic_series_coefficient(mu: f64) -> f64 {
    (1.0 + 2.0 * mu * mu) / (4.0 * mu * mu * mu)
}

impl ShootConfig {
    pub fn new(mu: f64) -> Self {
        Self::with_tolerances(mu, &Tolerances::default())
    }

    /// Picks the start radius so the dropped `r⁴` term stays a decade below
    /// `abs_tol`, capped at [`DEFAULT_START_RADIUS`].
    pub fn with_tolerances(mu: f64, tol: &Tolerances) -> Self {
        let r_fit = (0.1 * tol.abs_tol / quartic_series_coefficient(mu)).powf(0.25);
        let r0 = DEFAULT_START_RADIUS.min(r_fit);
        Self {
            mu,
            s_start: r0.ln(),
            rel_tol: tol.rel_tol,
            abs_tol: tol.abs_tol,
            max_steps: tol.max_steps,
            zero_tol: tol.zero_tol,
            s_max: 0.5 * mu * mu + 20.0,
        }
    }

    pub fn start_radius(&self) -> f64 {
        self.s_start.exp()
    }

    pub fn series_remainder(&self) -> f64 {
        quartic_series_coefficient(self.mu) * self.start_radius().powi(4)
    }

    pub fn validate(&self) -> Result<(), ShootError> {
        let bad = |msg: &str| Err(ShootError::InvalidConfig(msg.to_string()));
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad("mu must be positive and finite");
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol), ("zero_tol", self.zero_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ShootError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if !(self.s_start.is_finite() && self.s_max.is_finite() && self.s_start < self.s_max) {
            return bad("need s_start < s_max");
        }
        let remainder = self.series_remainder();
        if remainder >= self.abs_tol {
            return Err(ShootError::StartRadiusTooLarge { remainder, abs_tol: self.abs_tol });
        }
        Ok(())
    }
}

/// `g(u) = λ* u e^{u²}` with `λ* = 4/(μ² e^{μ²})`, evaluated without forming
/// `e^{μ²}`. Valid for `0 ≤ u ≤ μ`.
pub fn normalized_rhs(u: f64, mu: f64) -> f64 {
    debug_assert!(u >= 0.0 && u <= mu, "normalized_rhs needs 0 <= u <= mu");
    4.0 * u / (mu * mu) * ((u - mu) * (u + mu)).exp()
}

/// `e^{2s} g(u)`, the forcing of the log-radius equation. Odd in `u`, so it
/// stays meaningful on the overshoot past the first zero.
#[inline]
pub(crate) fn log_forcing(s: f64, u: f64, mu: f64) -> f64 {
    4.0 * u / (mu * mu) * (2.0 * s + (u - mu) * (u + mu)).exp()
}

/// `(e^{u²} - 1) e^{2s - μ²}` with the small-`u` branch kept accurate.
#[inline]
pub(crate) fn mt_density(s: f64, u: f64, mu: f64) -> f64 {
    let u2 = u * u;
    if u2 < 1.0 {
        u2.exp_m1() * (2.0 * s - mu * mu).exp()
    } else {
        (2.0 * s + (u - mu) * (u + mu)).exp() - (2.0 * s - mu * mu).exp()
    }
}

fn shooting_rhs(mu: f64) -> impl Fn(f64, &[f64; DIM]) -> [f64; DIM] {
    move |s, y| {
        let forcing = log_forcing(s, y[0], mu);
        [y[1], -forcing, y[1] * y[1], y[0] * forcing, mt_density(s, y[0], mu)]
    }
}

/// Solution state at one log-radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub s: f64,
    pub u: f64,
    /// `u_s = r u_r`.
    pub v: f64,
    /// `∫ u_s² ds` from the origin.
    pub lam_acc: f64,
    /// `∫ u g(u) e^{2s} ds` from the origin.
    pub mass_acc: f64,
    /// `∫ (e^{u²}-1) e^{2s-μ²} ds` from the origin.
    pub mt_acc: f64,
}

impl OdeState {
    fn from_vec(s: f64, y: &[f64; DIM]) -> Self {
        Self { s, u: y[0], v: y[1], lam_acc: y[2], mass_acc: y[3], mt_acc: y[4] }
    }

    fn to_vec(self) -> [f64; DIM] {
        [self.u, self.v, self.lam_acc, self.mass_acc, self.mt_acc]
    }

    /// Disk radius in bubble units.
    pub fn r(&self) -> f64 {
        self.s.exp()
    }
}

/// State on `(0, r]` from the expansion `u = μ - r²/μ + O(r⁴)`, valid for
/// small `r` only.
pub fn series_state_at(mu: f64, r: f64) -> OdeState {
    let r2 = r * r;
    let r4 = r2 * r2;
    let u = mu - r2 / mu;
    let v = -2.0 * r2 / mu;
    // ∫_0^r of the leading terms of each accumulator integrand, in r dr form.
    let lam_acc = r4 / (mu * mu);
    let mass_acc = 2.0 * r2 - 2.0 * r4 * (1.0 + 1.0 / (mu * mu));
    let mt_acc = -(-mu * mu).exp_m1() * 0.5 * r2;
    OdeState { s: r.ln(), u, v, lam_acc, mass_acc, mt_acc }
}

/// Validated start state for `cfg`.
pub fn series_initial_state(cfg: &ShootConfig) -> Result<OdeState, ShootError> {
    cfg.validate()?;
    let mut st = series_state_at(cfg.mu, cfg.start_radius());
    st.s = cfg.s_start;
    Ok(st)
}

/// A solved radial profile in bubble coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub mu: f64,
    pub s_start: f64,
    pub tau_hat: f64,
    pub s_hat: f64,
    pub log_lambda_mu: f64,
    /// `Λ(μ) = 2π ∫ u_s² ds`.
    pub dirichlet_energy: f64,
    /// `2π ∫ u g(u) e^{2s} ds`.
    pub nonlinear_mass: f64,
    /// `E(u_μ) = ∫_{B_1} (e^{u_μ²} - 1) dx`.
    pub mt_value: f64,
    /// `u_s` at the crossing.
    pub crossing_slope: f64,
    pub segments: Vec<DenseSegment<DIM>>,
    pub step_count: usize,
    pub rejected_steps: usize,
    /// Largest accepted local error estimate on `u`.
    pub max_local_error: f64,
    /// Sum of local error estimates on `u`, a crude global error bound.
    pub u_error_sum: f64,
    pub zero_tol: f64,
}

impl RadialProfile {
    pub fn lambda_mu(&self) -> f64 {
        self.log_lambda_mu.exp()
    }

    /// `|Λ - mass| / Λ`; zero up to quadrature error by integration by parts.
    pub fn energy_identity_gap(&self) -> f64 {
        (self.dirichlet_energy - self.nonlinear_mass).abs() / self.dirichlet_energy
    }

    fn check_range(&self, s: f64) -> Result<(), ShootError> {
        if s.is_nan() || s < self.s_start || s > self.s_hat {
            return Err(ShootError::OutOfRange { s, lo: self.s_start, hi: self.s_hat });
        }
        Ok(())
    }

    fn segment_for(&self, s: f64) -> &DenseSegment<DIM> {
        let idx = self.segments.partition_point(|seg| seg.s1() < s);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    /// Full interpolated state at `s ∈ [s_start, ŝ]`.
    pub fn state_at(&self, s: f64) -> Result<OdeState, ShootError> {
        self.check_range(s)?;
        let y = self.segment_for(s).eval(s);
        Ok(OdeState::from_vec(s, &y))
    }

    /// `(u, u_s)` at log-radius `s`.
    pub fn evaluate(&self, s: f64) -> Result<(f64, f64), ShootError> {
        self.state_at(s).map(|st| (st.u, st.v))
    }

    /// State at bubble radius `r ∈ [0, τ̂]`, using the series below the start radius.
    pub fn state_at_radius(&self, r: f64) -> Result<OdeState, ShootError> {
        if r.is_nan() || r < 0.0 || r > self.tau_hat {
            return Err(ShootError::OutOfRange { s: r.ln(), lo: self.s_start, hi: self.s_hat });
        }
        if r == 0.0 {
            return Ok(OdeState { s: f64::NEG_INFINITY, u: self.mu, v: 0.0, lam_acc: 0.0, mass_acc: 0.0, mt_acc: 0.0 });
        }
        let s = r.ln().min(self.s_hat);
        if s < self.s_start {
            return Ok(series_state_at(self.mu, r));
        }
        self.state_at(s)
    }

    /// Dense samples: every step start plus `per_step - 1` interior points,
    /// ending exactly at `ŝ`.
    pub fn dense_samples(&self, per_step: usize) -> Vec<OdeState> {
        let per_step = per_step.max(1);
        let mut out = Vec::with_capacity(self.segments.len() * per_step + 1);
        for seg in &self.segments {
            for k in 0..per_step {
                let s = seg.s0 + seg.h * k as f64 / per_step as f64;
                if s >= self.s_hat {
                    break;
                }
                out.push(OdeState::from_vec(s, &seg.eval(s)));
            }
        }
        let end = self.segment_for(self.s_hat).eval(self.s_hat);
        out.push(OdeState::from_vec(self.s_hat, &end));
        out
    }
}

/// Finds the zero of `u` inside a bracketing segment by safeguarded Newton.
fn refine_crossing(seg: &DenseSegment<DIM>, zero_tol: f64) -> f64 {
    let (mut lo, mut hi) = (seg.s0, seg.s1());
    let mut s = {
        let (u0, u1) = (seg.start()[0], seg.end()[0]);
        lo + (hi - lo) * u0 / (u0 - u1)
    };
    for _ in 0..200 {
        let y = seg.eval(s);
        let (u, v) = (y[0], y[1]);
        if u.abs() <= 1e-3 * zero_tol {
            return s;
        }
        if u > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
            break;
        }
        let newton = s - u / v;
        s = if v < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    s
}

/// Shoots from the series start to the first zero of `u`.
pub fn integrate_profile(cfg: &ShootConfig) -> Result<RadialProfile, ShootError> {
    let init = series_initial_state(cfg)?;
    let mu = cfg.mu;
    let ctl =
        StepControl { rel_tol: cfg.rel_tol, abs_tol: cfg.abs_tol, max_steps: cfg.max_steps, h_max: f64::INFINITY };

    let mut segments: Vec<DenseSegment<DIM>> = Vec::new();
    let mut max_local_error: f64 = 0.0;
    let mut u_error_sum = 0.0;
    let mut crossing: Option<f64> = None;
    let mut blew_up: Option<f64> = None;

    let outcome = integrate(shooting_rhs(mu), init.s, init.to_vec(), cfg.s_max, &ctl, |step| {
        let seg = step.segment;
        let end = seg.end();
        if end.iter().any(|x| !x.is_finite()) || end[0] > mu {
            blew_up = Some(seg.s1());
            return ControlFlow::Break(());
        }
        max_local_error = max_local_error.max(step.local_error[0]);
        u_error_sum += step.local_error[0];
        segments.push(seg.clone());
        if end[0] <= 0.0 {
            crossing = Some(refine_crossing(seg, cfg.zero_tol));
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });

    let stats = match outcome {
        Ok(stats) => stats,
        Err((StepFailure::NonFinite { s }, _)) => return Err(ShootError::BlewUp { s }),
        Err((StepFailure::BudgetExhausted { s } | StepFailure::ReachedEnd { s }, stats)) => {
            return Err(ShootError::NoZero { s_max: cfg.s_max, s_reached: s, steps: stats.accepted })
        }
    };
    if let Some(s) = blew_up {
        return Err(ShootError::BlewUp { s });
    }
    let s_hat = crossing.ok_or(ShootError::BlewUp { s: cfg.s_max })?;

    let last = segments.last().expect("a crossing implies at least one step");
    let at_hat = OdeState::from_vec(s_hat, &last.eval(s_hat));
    let two_pi = 2.0 * std::f64::consts::PI;
    let log_lambda_mu = 4.0f64.ln() + 2.0 * s_hat - mu * mu - 2.0 * mu.ln();
    // E = 2π e^{μ² - 2ŝ} ∫ (e^{u²}-1) e^{2s-μ²} ds
    let mt_value = two_pi * (mu * mu - 2.0 * s_hat).exp() * at_hat.mt_acc;

    Ok(RadialProfile {
        mu,
        s_start: cfg.s_start,
        tau_hat: s_hat.exp(),
        s_hat,
        log_lambda_mu,
        dirichlet_energy: two_pi * at_hat.lam_acc,
        nonlinear_mass: two_pi * at_hat.mass_acc,
        mt_value,
        crossing_slope: at_hat.v,
        segments,
        step_count: stats.accepted,
        rejected_steps: stats.rejected,
        max_local_error,
        u_error_sum,
        zero_tol: cfg.zero_tol,
    })
}

/// Integrates from the series start and stops exactly at `s_target`, which
/// must lie before the first zero.
pub fn integrate_until(cfg: &ShootConfig, s_target: f64) -> Result<OdeState, ShootError> {
    let init = series_initial_state(cfg)?;
    if s_target <= init.s {
        return Ok(init);
    }
    let ctl =
        StepControl { rel_tol: cfg.rel_tol, abs_tol: cfg.abs_tol, max_steps: cfg.max_steps, h_max: f64::INFINITY };
    let mut last: Option<[f64; DIM]> = None;
    let mut crossed = false;
    let res = integrate(shooting_rhs(cfg.mu), init.s, init.to_vec(), s_target, &ctl, |step| {
        let end = step.segment.end();
        if end[0] <= 0.0 {
            crossed = true;
            return ControlFlow::Break(());
        }
        if step.segment.s1() >= s_target {
            last = Some(end);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    match (res, last) {
        _ if crossed => Err(ShootError::OutOfRange { s: s_target, lo: init.s, hi: f64::NAN }),
        (Ok(_), Some(y)) => Ok(OdeState::from_vec(s_target, &y)),
        (Err((StepFailure::NonFinite { s }, _)), _) => Err(ShootError::BlewUp { s }),
        (Err((_, stats)), _) | (Ok(stats), None) => {
            Err(ShootError::NoZero { s_max: s_target, s_reached: f64::NAN, steps: stats.accepted })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_at_peak_and_origin() {
        assert!((normalized_rhs(3.0, 3.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(normalized_rhs(0.0, 2.0), 0.0);
    }

    #[test]
    fn rhs_example_value() {
        let g = normalized_rhs(1.0, 2.0);
        assert!((g - (-3.0f64).exp()).abs() < 1e-16);
        assert!((g - 0.049787068367863944).abs() < 1e-15);
        // Same value through the unfused form, fine at small mu.
        let lambda_star = 4.0 / (4.0 * 4.0f64.exp());
        assert!((g - lambda_star * 1.0 * 1.0f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn rhs_never_overflows_at_large_mu() {
        let g = normalized_rhs(29.0, 30.0);
        assert!(g.is_finite() && g > 0.0);
        assert!((normalized_rhs(30.0, 30.0) - 4.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn series_start_values() {
        let mut cfg = ShootConfig::new(1.0);
        cfg.s_start = 1e-4f64.ln();
        let st = series_initial_state(&cfg).unwrap();
        assert!((st.u - (1.0 - 1e-8)).abs() < 1e-15);
        assert!((st.v + 2e-8).abs() < 1e-20);

        let mut cfg = ShootConfig::new(10.0);
        cfg.s_start = 1e-4f64.ln();
        let st = series_initial_state(&cfg).unwrap();
        assert!((st.u - (10.0 - 1e-9)).abs() < 1e-14);
    }

    #[test]
    fn quartic_remainder_at_unit_peak() {
        // u = 1 - r² + (3/4) r⁴ + ...
        assert!((quartic_series_coefficient(1.0) - 0.75).abs() < 1e-15);
        let mut cfg = ShootConfig::new(1.0);
        cfg.s_start = 1e-4f64.ln();
        let rem = cfg.series_remainder();
        assert!(rem < 1e-16 && rem < cfg.abs_tol);
    }

    #[test]
    fn start_radius_too_large_is_rejected() {
        let mut cfg = ShootConfig::new(1e-3);
        cfg.s_start = 1e-4f64.ln();
        assert!(matches!(series_initial_state(&cfg), Err(ShootError::StartRadiusTooLarge { .. })));
        // The default picks a radius that passes.
        assert!(ShootConfig::new(1e-3).validate().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ShootConfig::new(1.0);
        cfg.mu = -1.0;
        assert!(matches!(cfg.validate(), Err(ShootError::InvalidConfig(_))));
        let mut cfg = ShootConfig::new(1.0);
        cfg.rel_tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ShootConfig::new(1.0);
        cfg.s_max = cfg.s_start - 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn step_budget_exhaustion_reports_no_zero() {
        let mut cfg = ShootConfig::new(2.0);
        cfg.max_steps = 3;
        assert!(matches!(integrate_profile(&cfg), Err(ShootError::NoZero { .. })));
        let mut cfg = ShootConfig::new(2.0);
        cfg.s_max = -3.0;
        assert!(matches!(integrate_profile(&cfg), Err(ShootError::NoZero { .. })));
    }

    #[test]
    fn crossing_and_endpoints() {
        let cfg = ShootConfig::new(1.5);
        let p = integrate_profile(&cfg).unwrap();
        let (u, _) = p.evaluate(p.s_hat).unwrap();
        assert!(u.abs() <= cfg.zero_tol);
        let (u0, v0) = p.evaluate(p.s_start).unwrap();
        let init = series_initial_state(&cfg).unwrap();
        assert_eq!((u0, v0), (init.u, init.v));
        assert!(p.evaluate(p.s_hat + 1e-3).is_err());
        assert!(p.evaluate(p.s_start - 1e-3).is_err());
        let expected = 4.0f64.ln() + 2.0 * p.s_hat - 1.5 * 1.5 - 2.0 * 1.5f64.ln();
        assert_eq!(p.log_lambda_mu, expected);
    }

    #[test]
    fn monotone_and_bounded_along_profile() {
        for mu in [0.01, 1.0, 5.0, 14.0] {
            let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
            let samples = p.dense_samples(4);
            for w in samples.windows(2) {
                assert!(w[1].u < w[0].u, "u not decreasing at mu={mu}, s={}", w[1].s);
            }
            for w in p.segments.windows(2) {
                let (a, b) = (w[0].start(), w[1].start());
                assert!(b[2] >= a[2] && b[3] >= a[3] && b[4] >= a[4], "accumulators decreased at mu={mu}");
            }
            assert!(samples.iter().all(|st| st.u <= mu && st.v <= 0.0));
            assert!(samples[..samples.len() - 1].iter().all(|st| st.u > 0.0));
        }
    }
}
