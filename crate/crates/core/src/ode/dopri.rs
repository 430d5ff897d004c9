//! Dormand–Prince 5(4) with PI step control and the 4th-order continuous
//! extension (Hairer, Nørsett & Wanner, `dopri5`).
//!
//! The stepper is generic over the state dimension so the radial shooting
//! system and the auxiliary Cauchy problems share one implementation.

use std::ops::ControlFlow;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Tolerances and budget for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on a single step; `f64::INFINITY` disables it.
    pub h_max: f64,
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub s0: f64,
    pub h: f64,
    coef: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.coef[0]
    }

    pub fn end(&self) -> [f64; N] {
        std::array::from_fn(|i| self.coef[0][i] + self.coef[1][i])
    }

    /// Evaluates the interpolant at `s`; exact at both segment ends.
    pub fn eval(&self, s: f64) -> [f64; N] {
        let theta = (s - self.s0) / self.h;
        self.eval_theta(theta)
    }

    pub fn eval_theta(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let c = &self.coef;
        std::array::from_fn(|i| c[0][i] + theta * (c[1][i] + t1 * (c[2][i] + theta * (c[3][i] + t1 * c[4][i]))))
    }
}

/// Counters reported after the loop ends.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted scaled error norm (≤ 1 by construction).
    pub max_err_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    /// The step budget ran out before the callback stopped the loop.
    BudgetExhausted { s: f64 },
    /// Reached the end of the interval without the callback stopping.
    ReachedEnd { s: f64 },
    /// Non-finite state or step size collapse.
    NonFinite { s: f64 },
}

/// Information handed to the per-step callback.
pub struct AcceptedStep<'a, const N: usize> {
    pub segment: &'a DenseSegment<N>,
    /// Absolute local error estimate per component.
    pub local_error: [f64; N],
}

fn weighted_norm<const N: usize>(e: &[f64; N], y0: &[f64; N], y1: &[f64; N], ctl: &StepControl) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sk = ctl.abs_tol + ctl.rel_tol * y0[i].abs().max(y1[i].abs());
        let q = e[i] / sk;
        acc += q * q;
    }
    (acc / N as f64).sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

fn initial_step<const N: usize, F>(f: &F, s0: f64, y0: &[f64; N], f0: &[f64; N], ctl: &StepControl) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| ctl.abs_tol + ctl.rel_tol * y0[i].abs();
    let rms = |v: &[f64; N]| (v.iter().enumerate().map(|(i, x)| (x / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { (0.01 * d0 / d1).min(ctl.h_max) };
    // Second-derivative probe; redone closer in when the first probe lands
    // somewhere the solution has already changed character.
    let mut h1 = h0;
    for _ in 0..60 {
        let y1 = axpy(y0, h0, &[(1.0, f0)]);
        let f1 = f(s0 + h0, &y1);
        let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
        let d2 = rms(&diff) / h0;
        h1 = if !d2.is_finite() {
            0.1 * h0
        } else if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        if h1 >= 0.5 * h0 {
            break;
        }
        h0 = h1.max(0.01 * h0);
    }
    (100.0 * h0).min(h1).min(ctl.h_max)
}

/// Integrates `y' = f(s, y)` from `s0` towards `s_end`, calling `on_step`
/// after every accepted step. The loop ends when the callback breaks; any
/// other exit is reported as a [`StepFailure`].
pub fn integrate<const N: usize, F, C>(
    f: F,
    s0: f64,
    y0: [f64; N],
    s_end: f64,
    ctl: &StepControl,
    mut on_step: C,
) -> Result<StepStats, (StepFailure, StepStats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    C: FnMut(AcceptedStep<'_, N>) -> ControlFlow<()>,
{
    let mut stats = StepStats::default();
    let mut s = s0;
    let mut y = y0;
    let mut k1 = f(s, &y);
    stats.rhs_evals += 1;
    let mut h = initial_step(&f, s, &y, &k1, ctl);
    stats.rhs_evals += 1;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted >= ctl.max_steps {
            return Err((StepFailure::BudgetExhausted { s }, stats));
        }
        if s >= s_end {
            return Err((StepFailure::ReachedEnd { s }, stats));
        }
        h = h.min(s_end - s).min(ctl.h_max);
        if !(h.is_finite() && h > f64::EPSILON * s.abs().max(1.0)) {
            return Err((StepFailure::NonFinite { s }, stats));
        }

        let k2 = f(s + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(s + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(s + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(s + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(s + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(s + h, &y1);
        stats.rhs_evals += 6;

        let err: [f64; N] =
            std::array::from_fn(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]));
        let err_norm = weighted_norm(&err, &y, &y1, ctl);
        if !err_norm.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            // Retry with a much smaller step before giving up.
            h *= FAC_MIN;
            stats.rejected += 1;
            last_rejected = true;
            continue;
        }

        let expo = 0.2 - BETA * 0.75;
        if err_norm <= 1.0 {
            let mut fac = SAFETY * err_norm.max(1e-16).powf(-expo) * fac_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            fac_old = err_norm.max(1e-4);

            let rc2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
            let rc3: [f64; N] = std::array::from_fn(|i| h * k1[i] - rc2[i]);
            let rc4: [f64; N] = std::array::from_fn(|i| rc2[i] - h * k7[i] - rc3[i]);
            let rc5: [f64; N] = std::array::from_fn(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            });
            let segment = DenseSegment { s0: s, h, coef: [y, rc2, rc3, rc4, rc5] };

            stats.accepted += 1;
            stats.max_err_norm = stats.max_err_norm.max(err_norm);
            let flow = on_step(AcceptedStep { segment: &segment, local_error: err.map(f64::abs) });

            s += h;
            y = y1;
            k1 = k7;
            h *= fac;
            last_rejected = false;
            if flow.is_break() {
                return Ok(stats);
            }
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * err_norm.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            last_rejected = true;
        }
    }
}
