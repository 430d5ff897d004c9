//! Plot-ready CSV tables and JSON summaries.
//!
//! Floats are written with 17 significant digits so every value re-parses
//! to the identical `f64`; column order is fixed and no timestamps are
//! written, so identical inputs produce identical bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{BlowupDecomposition, QuantizationProfile};
use crate::branch::{BranchCurve, BranchPoint, CountReport, SharpEstimate, FOUR_PI};
use crate::ode::RadialProfile;

pub const PROFILE_HEADER: &str = "s,r,u,u_s,f_density";
pub const BRANCH_HEADER: &str = "mu,log_lambda_mu,lambda_mu,Lambda,E_value,energy_identity_gap";
pub const DECOMPOSITION_HEADER: &str = "r,eta_num,eta0,w_num,w,phi_res";
pub const QUANTIZATION_HEADER: &str = "R,P,bubble_pred,tail_bound";

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn push_row(out: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// One row per dense sample; `f_density = u g(u)`, the bubble-normalized
/// `λ u² e^{u²}`.
pub fn profile_csv(profile: &RadialProfile, per_step: usize) -> String {
    let mu = profile.mu;
    let mut out = String::new();
    writeln!(out, "{PROFILE_HEADER}").unwrap();
    for st in profile.dense_samples(per_step) {
        let f = 4.0 * st.u * st.u / (mu * mu) * ((st.u - mu) * (st.u + mu)).exp();
        push_row(&mut out, &[st.s, st.r(), st.u, st.v, f]);
    }
    out
}

pub fn branch_csv(points: &[BranchPoint]) -> String {
    let mut out = String::new();
    writeln!(out, "{BRANCH_HEADER}").unwrap();
    for p in points {
        push_row(
            &mut out,
            &[p.mu, p.log_lambda_mu, p.lambda_mu, p.dirichlet_energy, p.mt_value, p.energy_identity_gap],
        );
    }
    out
}

pub fn decomposition_csv(d: &BlowupDecomposition) -> String {
    let mut out = String::new();
    writeln!(out, "{DECOMPOSITION_HEADER}").unwrap();
    for i in 0..d.r_grid.len() {
        push_row(&mut out, &[d.r_grid[i], d.eta_num[i], d.eta0_vals[i], d.w_num[i], d.w_vals[i], d.phi_res[i]]);
    }
    out
}

/// `tail_bound` is `NaN` where the bound does not apply (`R < R₀`).
pub fn quantization_csv(q: &QuantizationProfile) -> String {
    let mut out = String::new();
    writeln!(out, "{QUANTIZATION_HEADER}").unwrap();
    for i in 0..q.r_grid.len() {
        let tail = q.tail_bound[i].unwrap_or(f64::NAN);
        push_row(&mut out, &[q.r_grid[i], q.p_vals[i], q.bubble_prediction[i], tail]);
    }
    out
}

/// Parses one of the tables above back into its header and rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or("empty table")?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 2)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("line {}: expected {} fields, got {}", n + 2, header.len(), row.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub mu_min: f64,
    pub mu_max: f64,
    pub nodes: usize,
    pub rule: String,
    pub solved: usize,
    pub failed: usize,
}

/// JSON summary of a sweep (and of a refinement, when one was run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub mu_sharp: f64,
    pub lambda_sharp: f64,
    pub four_pi: f64,
    pub margin: f64,
    pub refined: bool,
    pub multimodal: bool,
    pub local_maxima: usize,
    pub max_energy_identity_gap: f64,
    pub grid: GridSummary,
    pub failures: Vec<crate::branch::NodeFailure>,
    /// Small-μ end of the branch: `λ_μ` at the first node, which tends to
    /// the first Dirichlet eigenvalue `j₀²` of the disk.
    pub small_mu_lambda: Option<f64>,
    pub first_eigenvalue_j0_sq: f64,
}

/// Square of the first zero of `J₀`.
pub const J0_FIRST_ZERO_SQ: f64 = 2.404_825_557_695_773 * 2.404_825_557_695_773;

pub fn branch_summary(curve: &BranchCurve) -> BranchSummary {
    let sharp: Option<&SharpEstimate> = curve.sharp.as_ref();
    BranchSummary {
        mu_sharp: curve.mu_sharp,
        lambda_sharp: curve.lambda_sharp,
        four_pi: FOUR_PI,
        margin: curve.lambda_sharp - FOUR_PI,
        refined: sharp.is_some(),
        multimodal: curve.local_maxima().len() > 1,
        local_maxima: curve.local_maxima().len(),
        max_energy_identity_gap: curve.max_energy_identity_gap(),
        grid: GridSummary {
            mu_min: curve.grid.mu_min,
            mu_max: curve.grid.mu_max,
            nodes: curve.grid.nodes,
            rule: curve.grid.rule.clone(),
            solved: curve.points.len(),
            failed: curve.failures.len(),
        },
        failures: curve.failures.clone(),
        small_mu_lambda: curve.points.first().map(|p| p.lambda_mu),
        first_eigenvalue_j0_sq: J0_FIRST_ZERO_SQ,
    }
}

/// JSON written by `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub level: f64,
    pub regime: String,
    pub observed_count: usize,
    pub crossings: Vec<f64>,
    pub mu_window: (f64, f64),
    pub lambda_sharp: f64,
    pub four_pi: f64,
    pub warning: Option<String>,
}

impl From<&CountReport> for CountSummary {
    fn from(c: &CountReport) -> Self {
        Self {
            level: c.level,
            regime: c.regime.label().to_string(),
            observed_count: c.observed_count(),
            crossings: c.crossings.clone(),
            mu_window: c.mu_window,
            lambda_sharp: c.lambda_sharp,
            four_pi: FOUR_PI,
            warning: c.warning.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_profile, ShootConfig};

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12.566370614359172, f64::MAX] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn profile_table_layout() {
        let p = integrate_profile(&ShootConfig::new(2.0)).unwrap();
        let csv = profile_csv(&p, 4);
        let (header, rows) = parse_csv(&csv).unwrap();
        assert_eq!(header.join(","), PROFILE_HEADER);
        assert_eq!(rows[0][0], p.s_start);
        assert_eq!(rows.last().unwrap()[0], p.s_hat);
        assert!(rows.last().unwrap()[2].abs() <= 1e-12);
        assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    }

    #[test]
    fn j0_constant() {
        assert!((J0_FIRST_ZERO_SQ - 5.783185962946784).abs() < 1e-14);
    }
}
