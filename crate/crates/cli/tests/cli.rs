use std::path::Path;
use std::process::{Command, Output};

use mtbranch::branch::{solve_mu, sweep_spec, GridSpec};
use mtbranch::export::{branch_csv, parse_csv, BRANCH_HEADER, PROFILE_HEADER};
use mtbranch::{Execution, Tolerances, FOUR_PI};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mt-branch")).args(args).env_remove("MT_BRANCH_SEED_DIR").output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    run(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--mu", "1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&dir.path().join("solve.json"));
    let lib = solve_mu(1.0, &Tolerances::default()).unwrap();
    assert_eq!(j["Lambda"].as_f64().unwrap().to_bits(), lib.dirichlet_energy.to_bits());
    assert_eq!(j["lambda_mu"].as_f64().unwrap().to_bits(), lib.lambda_mu.to_bits());
    let (header, rows) = parse_csv(&std::fs::read_to_string(dir.path().join("profile.csv")).unwrap()).unwrap();
    assert_eq!(header.join(","), PROFILE_HEADER);
    assert_eq!(rows[0][2], 1.0 - 1e-8);
}

#[test]
fn negative_height_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--mu", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu"));
    assert!(!dir.path().join("solve.json").exists());
}

#[test]
fn malformed_invocations_exit_two() {
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--mu", "abc"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["count"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["sweep", "--mu-min", "5", "--mu-max", "2"]).status.code(), Some(2));
}

#[test]
fn multiplier_bound_at_height_24() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["solve", "--mu", "24"]);
    assert!(o.status.success());
    let j = json(&dir.path().join("solve.json"));
    assert!(j["lambda_mu"].as_f64().unwrap() <= 4.0 / 576.0);
}

#[test]
fn no_solutions_above_sharp_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["count", "--Lambda", "20"]);
    assert!(o.status.success());
    let j = json(&dir.path().join("count.json"));
    assert_eq!(j["regime"], "above Lambda_sharp");
    assert_eq!(j["crossings"].as_array().unwrap().len(), 0);
    let text = stdout(&o);
    assert!(text.contains("above Lambda_sharp") && text.contains("[]"), "{text}");
}

#[test]
fn sharp_exceeds_four_pi() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sharp"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["Lambda_sharp", "mu_sharp", "four_pi", "margin"] {
        assert!(text.contains(key), "{text}");
    }
    let j = json(&dir.path().join("sharp.json"));
    assert!(j["lambda_sharp"].as_f64().unwrap() > 12.566371);
    assert_eq!(j["four_pi"].as_f64().unwrap(), FOUR_PI);
    assert!(j["margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn asymptotic_checks_at_height_16() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["asym", "--mu", "16"]);
    assert!(o.status.success());
    let j = json(&dir.path().join("asym.json"));
    assert_eq!(j["decay_ok"], true);
    assert_eq!(j["density_ok"], true);
    assert!(j["R0"].as_f64().unwrap() > 8.0);
    assert!(j["flux_at_r"].as_object().unwrap().len() == 5);
    for f in ["decomposition.csv", "quantization.csv"] {
        let (_, rows) = parse_csv(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap();
        assert!(!rows.is_empty());
    }
}

#[test]
fn sweeps_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_in(a.path(), &["sweep", "--jobs", "4"]).status.success());
    assert!(run_in(b.path(), &["sweep"]).status.success());
    for f in ["branch.csv", "branch.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("branch.csv")).unwrap();
    assert!(csv.starts_with(BRANCH_HEADER));
    let lib = sweep_spec(&GridSpec::default(), &Tolerances::default(), Execution::Sequential).unwrap();
    assert_eq!(csv, branch_csv(&lib.points));
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# small sweep\nmu_min = 0.5\nmu_max = 2\nnodes = 9\nout = {}\n", dir.path().display()),
    )
    .unwrap();
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--nodes", "5", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&dir.path().join("branch.json"));
    let expected = GridSpec { mu_min: 0.5, mu_max: 2.0, nodes: 5, ..GridSpec::default() }.nodes().len();
    assert_eq!(j["grid"]["nodes"].as_u64().unwrap() as usize, expected);
    assert_eq!(j["grid"]["mu_min"], 0.5);
    assert!(!dir.path().join("branch.csv").exists());

    std::fs::write(&cfg, "seed = 1\n").unwrap();
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mt-branch"))
        .args(["solve", "--mu", "0.5"])
        .env("MT_BRANCH_SEED_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("solve.json").exists());
}
