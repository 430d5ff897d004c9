//! The bubble `η₀(r) = -log(1 + r²)` and the second-order correction `w`.
//!
//! `w` solves the linearized Cauchy problem
//! `-Δw = 4e^{2η₀}(η₀ + η₀² + 2w)`, `w(0) = w'(0) = 0`, and has the closed form
//!
//! ```text
//! w(r) = η₀ + 2r²/(1+r²) - η₀²/2 + (1-r²)/(1+r²) · I(1+r²),
//! I(x) = ∫₁ˣ log t / (1-t) dt.
//! ```

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::sync::OnceLock;

use super::quadrature::{self, QuadratureError};
use super::AsymptoticsError;
use crate::ode::dopri::{integrate, DenseSegment, StepControl};

/// Below this offset `x - 1` the auxiliary integral is summed as a series.
const SERIES_LIMIT: f64 = 0.5;
const AUX_ABS_TOL: f64 = 1e-14;
const AUX_REL_TOL: f64 = 1e-15;

pub fn eta0(r: f64) -> f64 {
    -(r * r).ln_1p()
}

pub fn eta0_prime(r: f64) -> f64 {
    -2.0 * r / (1.0 + r * r)
}

/// `e^{2η₀} = (1+r²)^{-2}`.
pub fn bubble_density(r: f64) -> f64 {
    let q = 1.0 + r * r;
    1.0 / (q * q)
}

/// `I(1 + offset)` for `offset ≥ 0`.
///
/// Near `t = 1` the integrand `log t/(1-t) = -1 + (t-1)/2 - (t-1)²/3 + ...`
/// is integrated termwise; beyond, the substitution `t = e^y` gives the smooth
/// integrand `y / expm1(-y)`, handled by adaptive Gauss–Kronrod.
pub fn aux_integral_shifted(offset: f64) -> Result<f64, QuadratureError> {
    if !offset.is_finite() || offset < 0.0 {
        return Err(QuadratureError { a: 1.0, b: 1.0 + offset, estimate: f64::NAN, intervals: 0 });
    }
    if offset <= SERIES_LIMIT {
        return Ok(aux_series(offset));
    }
    let head = aux_series(SERIES_LIMIT);
    let tail = quadrature::integrate(
        |y: f64| y / (-y).exp_m1(),
        SERIES_LIMIT.ln_1p(),
        offset.ln_1p(),
        AUX_ABS_TOL,
        AUX_REL_TOL,
    )?;
    Ok(head + tail)
}

/// `I(x)` for `x ≥ 1`.
pub fn aux_integral(x: f64) -> Result<f64, QuadratureError> {
    aux_integral_shifted(x - 1.0)
}

// Σ_{n≥1} (-X)^n / n², for 0 ≤ X ≤ 1/2.
fn aux_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for n in 1..200 {
        pow *= -x;
        let term = pow / (n * n) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sum
}

/// Closed-form correction term `w(r)`.
pub fn w_closed_form(r: f64) -> Result<f64, QuadratureError> {
    let r2 = r * r;
    let q = 1.0 + r2;
    let e0 = -r2.ln_1p();
    let aux = aux_integral_shifted(r2)?;
    Ok(e0 + 2.0 * r2 / q - 0.5 * e0 * e0 + (1.0 - r2) / q * aux)
}

/// `w'(r) = 2r(1-r²)/(1+r²)² - 2log(1+r²)/(r(1+r²)) - 4r/(1+r²)² · I(1+r²)`.
pub fn w_prime(r: f64) -> Result<f64, QuadratureError> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let r2 = r * r;
    let q = 1.0 + r2;
    let aux = aux_integral_shifted(r2)?;
    Ok(2.0 * r * (1.0 - r2) / (q * q) - 2.0 * r2.ln_1p() / (r * q) - 4.0 * r / (q * q) * aux)
}

/// `2π r w'(r)`, the flux of `∇w` through the circle of radius `r`.
pub fn flux(r: f64) -> Result<f64, QuadratureError> {
    Ok(2.0 * PI * r * w_prime(r)?)
}

/// Right-hand side of the Cauchy problem, `4e^{2η₀}(η₀ + η₀² + 2w)`.
pub fn cauchy_source(r: f64, w: f64) -> f64 {
    let e0 = eta0(r);
    4.0 * bubble_density(r) * (e0 + e0 * e0 + 2.0 * w)
}

/// Finite-difference step used for residual checks: `2⁻⁹ max(1, r)`, near
/// the truncation/roundoff optimum of the 5-point second-derivative stencil.
pub fn fd_step(r: f64) -> f64 {
    f64::max(1.0, r) / 512.0
}

/// `Δf = f'' + f'/r` with 5-point central stencils for both derivatives.
pub fn fd_laplacian<F>(f: F, r: f64, h: f64) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> Result<f64, QuadratureError>,
{
    let (fm2, fm1, f0, fp1, fp2) = (f(r - 2.0 * h)?, f(r - h)?, f(r)?, f(r + h)?, f(r + 2.0 * h)?);
    let d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
    let d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    Ok(d2 + d1 / r)
}

/// `Δw + 4e^{2η₀}(η₀ + η₀² + 2w)` at `r > 0`, with `Δ` by finite differences.
pub fn w_cauchy_residual(r: f64) -> Result<f64, QuadratureError> {
    let lap = fd_laplacian(w_closed_form, r, fd_step(r))?;
    Ok(lap + cauchy_source(r, w_closed_form(r)?))
}

/// `Δη₀ + 4e^{2η₀}` at `r > 0`, with `Δ` by finite differences.
pub fn eta0_residual(r: f64) -> f64 {
    let lap = fd_laplacian(|x| Ok(eta0(x)), r, fd_step(r)).expect("eta0 is total");
    lap + 4.0 * bubble_density(r)
}

/// `sup |w - η₀|` over `[0, r_max]` on a fixed grid (uniform on `[0, 1]`,
/// geometric beyond).
pub fn w_bound_check(r_max: f64) -> Result<f64, QuadratureError> {
    let mut sup: f64 = 0.0;
    let mut visit = |r: f64| -> Result<(), QuadratureError> {
        sup = sup.max((w_closed_form(r)? - eta0(r)).abs());
        Ok(())
    };
    for k in 0..=200 {
        let r = r_max.min(1.0) * k as f64 / 200.0;
        visit(r)?;
    }
    if r_max > 1.0 {
        let n = (r_max.ln() * 200.0).ceil().max(1.0) as usize;
        for k in 1..=n {
            visit((r_max.ln() * k as f64 / n as f64).exp())?;
        }
    }
    Ok(sup)
}

/// Limit of `w - η₀` as `r → ∞`.
pub const W_MINUS_ETA0_LIMIT: f64 = 2.0 + PI * PI / 6.0;

const R0_SCAN_START: f64 = 1e-2;
const R0_SCAN_END: f64 = 1e6;
const R0_TOL: f64 = 1e-8;

/// Smallest `R₀` with `w(R₀) = -1` and `w < -1` on the scan grid beyond it.
pub fn find_r0() -> Result<f64, AsymptoticsError> {
    static R0: OnceLock<Result<f64, AsymptoticsError>> = OnceLock::new();
    R0.get_or_init(compute_r0).clone()
}

fn compute_r0() -> Result<f64, AsymptoticsError> {
    let ratio: f64 = 1.02;
    let n = ((R0_SCAN_END / R0_SCAN_START).ln() / ratio.ln()).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| R0_SCAN_START * ratio.powi(k as i32)).collect();
    let vals = grid.iter().map(|&r| w_closed_form(r)).collect::<Result<Vec<_>, _>>()?;
    // Last grid node with w ≥ -1; everything after it is below -1.
    let last_above = vals.iter().rposition(|&w| w >= -1.0).ok_or(AsymptoticsError::NoR0Crossing)?;
    if last_above + 1 >= grid.len() {
        return Err(AsymptoticsError::NoR0Crossing);
    }
    let (mut lo, mut hi) = (grid[last_above], grid[last_above + 1]);
    while hi - lo > R0_TOL * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if w_closed_form(mid)? >= -1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Numerical solution of the Cauchy problem for `w`, integrated in
/// `s = log r` from a series start with the shooting stepper.
#[derive(Debug, Clone)]
pub struct CauchyW {
    r_start: f64,
    segments: Vec<DenseSegment<2>>,
}

impl CauchyW {
    pub fn solve(r_max: f64, rel_tol: f64, abs_tol: f64) -> Result<Self, AsymptoticsError> {
        let r_start: f64 = 1e-3;
        // w = r⁴/4 + O(r⁶), r w' = r⁴ + O(r⁶)
        let y0 = [0.25 * r_start.powi(4), r_start.powi(4)];
        let rhs = |s: f64, y: &[f64; 2]| {
            let r = s.exp();
            [y[1], -r * r * cauchy_source(r, y[0])]
        };
        let ctl = StepControl { rel_tol, abs_tol, max_steps: 200_000, h_max: 0.1 };
        let s_end = r_max.ln();
        let mut segments = Vec::new();
        integrate(rhs, r_start.ln(), y0, s_end + 1.0, &ctl, |step| {
            segments.push(step.segment.clone());
            if step.segment.s1() >= s_end {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .map_err(|(_, stats)| AsymptoticsError::CauchyIntegration { steps: stats.accepted })?;
        Ok(Self { r_start, segments })
    }

    /// `w(r)` for `0 ≤ r ≤ r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        if r < self.r_start {
            return 0.25 * r.powi(4);
        }
        let s = r.ln();
        let idx = self.segments.partition_point(|seg| seg.s1() < s).min(self.segments.len() - 1);
        self.segments[idx].eval(s)[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta0_values() {
        assert_eq!(eta0(0.0), 0.0);
        assert!((eta0(1.0) + std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(eta0_prime(0.0), 0.0);
        assert!((eta0_prime(1.0) + 1.0).abs() < 1e-16);
    }

    #[test]
    fn eta0_solves_liouville() {
        for r in [0.5, 2.0, 10.0] {
            assert!(eta0_residual(r).abs() < 1e-10, "r={r}: {}", eta0_residual(r));
        }
    }

    #[test]
    fn aux_series_and_quadrature_agree_at_switch() {
        let below = aux_series(SERIES_LIMIT);
        let via_quad =
            quadrature::integrate(|t: f64| t.ln() / (1.0 - t), 1.25, 1.5, 1e-16, 1e-16).unwrap() + aux_series(0.25);
        assert!((below - via_quad).abs() < 1e-15);
        // Continuity across the switch.
        let a = aux_integral_shifted(SERIES_LIMIT).unwrap();
        let b = aux_integral_shifted(SERIES_LIMIT * (1.0 + 1e-12)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn aux_integral_near_one_behaves_like_minus_offset() {
        let x = 1e-9;
        assert!((aux_integral_shifted(x).unwrap() + x - x * x / 4.0).abs() < 1e-24);
        assert!(aux_integral_shifted(-1.0).is_err());
    }

    #[test]
    fn w_at_origin() {
        assert_eq!(w_closed_form(0.0).unwrap(), 0.0);
        assert_eq!(w_prime(0.0).unwrap(), 0.0);
        assert!(w_prime(1e-6).unwrap().abs() < 1e-10);
        // w ≈ r⁴/4 near the origin.
        let r: f64 = 1e-2;
        assert!((w_closed_form(r).unwrap() - 0.25 * r.powi(4)).abs() < 1e-11);
    }

    #[test]
    fn w_prime_matches_finite_differences() {
        for r in [0.3, 1.0, 3.0, 20.0] {
            let h = 1e-4 * f64::max(r, 1.0);
            let fd = (w_closed_form(r + h).unwrap() - w_closed_form(r - h).unwrap()) / (2.0 * h);
            assert!((fd - w_prime(r).unwrap()).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn r0_is_a_downcrossing() {
        let r0 = find_r0().unwrap();
        assert!((w_closed_form(r0).unwrap() + 1.0).abs() < 1e-8);
        assert!(w_closed_form(2.0 * r0).unwrap() < -1.0);
    }
}
