//! Test-only oracles, independent of the library's solution path.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Result of a direct `λ = 1` shoot in the original radius.
#[derive(Debug, Clone, Copy)]
pub struct DirectShoot {
    /// First zero `τ(μ)` of the `λ = 1` solution.
    pub tau: f64,
    /// `2π ∫_0^τ u'² r dr`.
    pub dirichlet: f64,
}

impl DirectShoot {
    pub fn lambda_mu(&self) -> f64 {
        self.tau * self.tau
    }

    /// `log τ̂` in the bubble normalization: `τ̂ = τ / sqrt(λ*)`.
    pub fn s_hat(&self, mu: f64) -> f64 {
        let log_lambda_star = 4.0f64.ln() - 2.0 * mu.ln() - mu * mu;
        self.tau.ln() - 0.5 * log_lambda_star
    }
}

type State = [f64; 3];

// -u'' - u'/r = u e^{u²}; at r = 0 the term u'/r is replaced by its limit u''(0).
fn direct_rhs(r: f64, y: &State) -> State {
    let g = y[0] * (y[0] * y[0]).exp();
    if r == 0.0 {
        [y[1], -0.5 * g, 0.0]
    } else {
        [y[1], -g - y[1] / r, 2.0 * PI * r * y[1] * y[1]]
    }
}

fn rk4_step(r: f64, y: &State, h: f64) -> State {
    let add = |y: &State, k: &State, c: f64| -> State { [y[0] + c * k[0], y[1] + c * k[1], y[2] + c * k[2]] };
    let k1 = direct_rhs(r, y);
    let k2 = direct_rhs(r + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = direct_rhs(r + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = direct_rhs(r + h, &add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Fixed-step RK4 from the origin; the last, partial step is sized so that
/// the RK4 map lands on `u = 0`.
pub fn rk4_direct(mu: f64, h: f64) -> DirectShoot {
    let mut r = 0.0;
    let mut y: State = [mu, 0.0, 0.0];
    loop {
        let next = rk4_step(r, &y, h);
        if next[0] <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(r, &y, mid)[0] > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-17 * (r + h) {
                    break;
                }
            }
            let d = 0.5 * (lo + hi);
            let end = rk4_step(r, &y, d);
            return DirectShoot { tau: r + d, dirichlet: end[2] };
        }
        r += h;
        y = next;
        assert!(r < 100.0, "no zero");
    }
}

/// Richardson extrapolation of the RK4 shoot at `h`, `h/2`, `h/4`, with the
/// difference between the two extrapolants as error estimate.
pub fn rk4_richardson(mu: f64, h: f64) -> (DirectShoot, f64) {
    let a = rk4_direct(mu, h);
    let b = rk4_direct(mu, h / 2.0);
    let c = rk4_direct(mu, h / 4.0);
    let rich = |x: f64, y: f64| (16.0 * y - x) / 15.0;
    let first = DirectShoot { tau: rich(a.tau, b.tau), dirichlet: rich(a.dirichlet, b.dirichlet) };
    let second = DirectShoot { tau: rich(b.tau, c.tau), dirichlet: rich(b.dirichlet, c.dirichlet) };
    let err = (first.tau - second.tau).abs().max((first.dirichlet - second.dirichlet).abs());
    (second, err)
}

/// `Li₂(x)` for `0 ≤ x < 1` by its power series.
fn li2_unit(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut p = 1.0;
    for n in 1..20_000 {
        p *= x;
        let t = p / (n as f64 * n as f64);
        sum += t;
        if t < 1e-18 {
            break;
        }
    }
    sum
}

/// `Li₂(-x)` for `x ≥ 0`, via the Landen identity for `x ≤ 2` and inversion beyond.
pub fn li2_neg(x: f64) -> f64 {
    if x <= 2.0 {
        let w = x / (1.0 + x);
        -li2_unit(w) - 0.5 * x.ln_1p().powi(2)
    } else {
        -PI * PI / 6.0 - 0.5 * x.ln().powi(2) - li2_neg(1.0 / x)
    }
}

/// `w(r)` with the auxiliary integral written as `I(1 + r²) = Li₂(-r²)`.
pub fn w_by_dilog(r: f64) -> f64 {
    let r2 = r * r;
    let e0 = -r2.ln_1p();
    e0 + 2.0 * r2 / (1.0 + r2) - 0.5 * e0 * e0 + (1.0 - r2) / (1.0 + r2) * li2_neg(r2)
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Significant-digit agreement: `|a - b| ≤ 0.5·10^{1-digits}·|b|`.
pub fn agree_to_digits(a: f64, b: f64, digits: i32) -> bool {
    (a - b).abs() <= 0.5 * 10f64.powi(1 - digits) * b.abs()
}

/// First zero of `J₀`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;
