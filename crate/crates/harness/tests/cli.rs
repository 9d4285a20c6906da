use std::fs;
use std::path::Path;

use fracfold_harness::cli::run;

fn fracfold(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["fracfold".to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    argv.push("--out".into());
    argv.push(out.display().to_string());
    run(argv)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(["fracfold", "--help"]), 0);
    assert_eq!(run(["fracfold", "--version"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracfold(dir.path(), &["solve-ps", "--bogus", "1"]), 1);
    assert_eq!(fracfold(dir.path(), &["launch"]), 1);
    assert_eq!(fracfold(dir.path(), &["solve-ps", "--config", "/nonexistent/run.cfg"]), 1);
    assert_eq!(fracfold(dir.path(), &["verify", "--suite", "nonsense"]), 1);
    assert_eq!(fracfold(dir.path(), &["solve-ps", "--s", "1.5"]), 1);
}

#[test]
fn solve_ps_super_regime_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let code = fracfold(dir.path(), &["solve-ps", "--s", "0.4", "--delta", "3", "--beta", "0", "--n", "512"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "solution_ps.json")).unwrap();
    let alpha = json["fitted_exponent"].as_f64().unwrap();
    assert!((alpha - 0.2).abs() <= 0.05, "fitted exponent {alpha}");
    assert_eq!(json["grid"]["n"], 512);
    assert_eq!(json["values"].as_array().unwrap().len(), 512);
    assert!(json["params"]["p"].is_null());
    let profile = read(dir.path(), "profile_ps.dat");
    assert_eq!(profile.lines().filter(|l| !l.starts_with('#')).count(), 256);
}

#[test]
fn branch_from_config_has_stable_minimal_segment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "[problem]\ns = 0.4\ndelta = 0.5\np = 2\n\n[grid]\nn = 128\n").unwrap();
    assert_eq!(fracfold(dir.path(), &["branch", "--config", cfg.to_str().unwrap()]), 0);
    let csv = read(dir.path(), "branch.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda,sup_norm,lambda1,monitor,arclength,residual,segment");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let minimal: Vec<_> = rows.iter().filter(|r| r[6] == "minimal").collect();
    assert!(minimal.len() >= 5);
    assert!(minimal.iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
    assert!(rows.iter().any(|r| r[6] == "upper"));

    let lambdas: Vec<f64> = read(dir.path(), "diagram.dat")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    let top = lambdas.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert!(top > 0 && top < lambdas.len() - 1);
    assert!(lambdas[..=top].windows(2).all(|w| w[1] > w[0]));
    assert!(lambdas[top..].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn verify_rates_lists_every_regime() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracfold(dir.path(), &["verify", "--suite", "rates"]), 0);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "verification.json")).unwrap();
    let names: Vec<&str> = json["records"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["rates/sub", "rates/super", "rates/critical"]);
    assert_eq!(json["seed"], 0);
    assert!(read(dir.path(), "verification.txt").contains("rates/critical"));
}

#[test]
fn failed_verification_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracfold(dir.path(), &["verify", "--suite", "holder"]), 2);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "verification.json")).unwrap();
    assert!(json["records"].as_array().unwrap().iter().any(|r| r["pass"] == false));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(fracfold(dir, &["fold", "--n", "64"]), 0);
        assert_eq!(fracfold(dir, &["solve-plambda", "--n", "64", "--lambda", "0.3"]), 0);
        assert_eq!(fracfold(dir, &["verify", "--suite", "comparison,uniqueness", "--seed", "11"]), 0);
    }
    for name in ["branch.csv", "diagram.dat", "fold.json", "solution_fold.json", "solution_plambda.json", "verification.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert!(read(a.path(), "verification.json").contains("\"seed\": 11"));
}

#[test]
fn assemble_check_dumps_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("a.txt");
    assert_eq!(fracfold(dir.path(), &["assemble-check", "--n", "16", "--dump-matrix", dump.to_str().unwrap()]), 0);
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "operator.json")).unwrap();
    assert!(json["max_offdiagonal"].as_f64().unwrap() < 0.0);
    assert_eq!(json["asymmetry"].as_f64().unwrap(), 0.0);
    assert_eq!(fs::read_to_string(&dump).unwrap().lines().count(), 256);
}

#[test]
fn multiplicity_writes_one_row_per_target() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fracfold(dir.path(), &["multiplicity", "--n", "128"]), 0);
    let csv = read(dir.path(), "multiplicity.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}
