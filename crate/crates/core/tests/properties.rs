use mtbranch::asymptotics::{geometric_grid, quantization_profile};
use mtbranch::branch::{solve_mu, sweep_branch};
use mtbranch::export::{branch_csv, parse_csv, profile_csv, BRANCH_HEADER};
use mtbranch::{integrate_profile, Execution, ShootConfig, Tolerances};
use proptest::prelude::*;

// Heights sampled log-uniformly over the supported range.
fn height() -> impl Strategy<Value = f64> {
    ((1e-3f64).ln()..=(30f64).ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn profile_is_monotone_and_bounded(mu in height()) {
        let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
        let samples = p.dense_samples(4);
        for w in samples.windows(2) {
            prop_assert!(w[1].u <= w[0].u + 1e-12 * mu);
        }
        let (_, interior) = samples.split_last().unwrap();
        for st in interior {
            prop_assert!(st.u > 0.0 && st.u <= mu);
        }
        prop_assert!(samples.last().unwrap().u.abs() <= 1e-12);
        prop_assert!(p.crossing_slope < 0.0);
    }

    #[test]
    fn energy_identity(mu in height()) {
        let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
        prop_assert!(p.energy_identity_gap() < 1e-6, "gap {}", p.energy_identity_gap());
    }

    #[test]
    fn log_lambda_identity(mu in height()) {
        let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
        let expected = 4f64.ln() + 2.0 * p.s_hat - mu * mu - 2.0 * mu.ln();
        prop_assert!((p.log_lambda_mu - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn solves_are_deterministic(mu in height()) {
        let tol = Tolerances::default();
        prop_assert_eq!(solve_mu(mu, &tol).unwrap(), solve_mu(mu, &tol).unwrap());
    }

    #[test]
    fn profile_csv_round_trips(mu in height()) {
        let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
        let (_, rows) = parse_csv(&profile_csv(&p, 2)).unwrap();
        let samples = p.dense_samples(2);
        prop_assert_eq!(rows.len(), samples.len());
        for (row, st) in rows.iter().zip(&samples) {
            prop_assert_eq!(row[0], st.s);
            prop_assert_eq!(row[2], st.u);
            prop_assert_eq!(row[3], st.v);
        }
    }

    #[test]
    fn quantization_mass_is_monotone(mu in 1.0f64..30.0) {
        let p = integrate_profile(&ShootConfig::new(mu)).unwrap();
        let grid = geometric_grid(1e-2f64.min(p.tau_hat), p.tau_hat, 30);
        let q = quantization_profile(&p, &grid).unwrap();
        // Nondecreasing up to the dense-output error once P has saturated.
        let slack = 10.0 * ShootConfig::new(mu).rel_tol;
        for w in q.p_vals.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - slack), "{} < {}", w[1], w[0]);
        }
        prop_assert!(*q.p_vals.last().unwrap() <= p.dirichlet_energy * (1.0 + 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn branch_csv_round_trips(a in 0.01f64..5.0, span in 0.1f64..20.0, n in 2usize..12) {
        let b = (a + span).min(30.0);
        let grid: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
        let curve = sweep_branch(&grid, &Tolerances::default(), Execution::Sequential).unwrap();
        let (header, rows) = parse_csv(&branch_csv(&curve.points)).unwrap();
        prop_assert_eq!(header.join(","), BRANCH_HEADER);
        for (row, pt) in rows.iter().zip(&curve.points) {
            prop_assert_eq!(row[0], pt.mu);
            prop_assert_eq!(row[1], pt.log_lambda_mu);
            prop_assert_eq!(row[3], pt.dirichlet_energy);
            prop_assert_eq!(row[4], pt.mt_value);
        }
    }
}
