use std::path::Path;
use std::process::{Command, Output};

fn snls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("snls runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(line: &str, key: &str) -> f64 {
    let tok = line.split_whitespace().find_map(|t| t.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("no {key} in {line}"));
    tok.parse().unwrap()
}

// Small periodic grid for fast Monte Carlo runs.
const SMALL: &[&str] = &["--n-grid", "128", "--half-width", "31.41592653589793", "--dt", "0.002", "--k-max", "4"];

#[test]
fn bounds_at_the_balanced_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&["bounds", "--gamma", "0.714285714", "--T", "10", "--phi-norm", "1"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    let upper = s.lines().find(|l| l.starts_with("upper")).unwrap();
    assert!((field(upper, "max") + 1.0 / 70.0).abs() < 1e-8, "{upper}");
    let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(csv.starts_with("# config_sha256="));
    assert!(csv.lines().next().unwrap().ends_with("command=bounds"));
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn soliton_parameter_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&["cov-soliton", "--gamma", "0.75", "--T", "10", "--datum", "soliton"], dir.path());
    assert!(o.status.success());
    let s = stdout(&o);
    let line = s.lines().find(|l| l.starts_with("exponent")).unwrap();
    let k = 12.0 + std::f64::consts::PI.powi(2);
    assert!((field(line, "exponent") + k / 180.0).abs() < 1e-10, "{line}");
}

#[test]
fn soliton_check_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&["soliton-check"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.starts_with("PASS"), "{s}");
    assert!(field(s.lines().next().unwrap(), "max_rel_l2_error") <= 1e-6);
}

#[test]
fn errors_are_single_classified_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = snls(&["bounds", "--gamma", "1.5"], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[invalid-argument]: "), "{err}");

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "gamma = 0.5\nunknown_key = 3\n").unwrap();
    let o = snls(&["bounds", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[config]: "));
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"bounds\"\ngamma = 0.75\nT = 10.0\n").unwrap();
    let out = dir.path().join("a");
    let o = snls(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success());
    let lower = stdout(&o).lines().find(|l| l.starts_with("lower")).unwrap().to_string();
    let k = 12.0 + std::f64::consts::PI.powi(2);
    assert!((field(&lower, "max") + k / 180.0).abs() < 1e-10);
    // Flags win over the file.
    let o = snls(&["bounds", "--config", cfg.to_str().unwrap(), "--gamma", "0.5"], &dir.path().join("b"));
    let m = std::fs::read_to_string(dir.path().join("b/manifest.toml")).unwrap();
    assert!(o.status.success());
    assert!(m.contains("gamma = 0.5\n"));
    // A config written for another command is refused.
    let o = snls(&["cov-full", "--config", cfg.to_str().unwrap()], &dir.path().join("c"));
    assert!(!o.status.success());
}

#[test]
fn manifest_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let mut args = vec!["mc-error", "--n-samples", "16", "--T", "0.5", "--eps", "0.02", "--seed", "7"];
    args.extend_from_slice(SMALL);
    let o = snls(&args, &first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = dir.path().join("second");
    let manifest = first.join("manifest.toml");
    let o = snls(&["run", "--config", manifest.to_str().unwrap()], &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["mc_error.csv", "mc_error_samples.csv"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let m: toml::Table = std::fs::read_to_string(&manifest).unwrap().parse().unwrap();
    let head = m["manifest"].as_table().unwrap();
    assert_eq!(head["seed"].as_integer(), Some(7));
    assert_eq!(head["command"].as_str(), Some("mc-error"));
    assert!(head["wall_time_s"].as_float().unwrap() >= 0.0);
}

#[test]
fn thread_count_does_not_change_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["mc-shift", "--n-samples", "12", "--T", "0.5", "--eps", "0.05"];
    args.extend_from_slice(SMALL);
    let mut one = args.clone();
    one.extend_from_slice(&["--threads", "1"]);
    let mut two = args.clone();
    two.extend_from_slice(&["--threads", "2"]);
    assert!(snls(&one, &dir.path().join("one")).status.success());
    assert!(snls(&two, &dir.path().join("two")).status.success());
    let a = std::fs::read(dir.path().join("one/shift_samples.csv")).unwrap();
    let b = std::fs::read(dir.path().join("two/shift_samples.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn remaining_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["cov-amplitude", "--gamma", "0.5", "--datum", "soliton"], "cov_amplitude.csv"),
        (vec!["cov-full", "--gamma", "0.25"], "cov_full.csv"),
        (vec!["sweep-gamma", "--points", "3"], "sweep.csv"),
        (vec!["mc-blowup", "--n-samples", "2", "--eps", "0.001", "--levels", "6,10"], "blowup.csv"),
        (
            vec!["simulate", "--datum", "soliton", "--eps", "0", "--T", "0.5", "--n-grid", "256", "--half-width", "31.41592653589793"],
            "trajectory.csv",
        ),
        (vec!["rate", "--T", "3", "--gamma", "0.4", "--n-times", "31", "--k-max", "12"], "rate.json"),
    ];
    for (i, (args, file)) in cases.into_iter().enumerate() {
        let out = dir.path().join(i.to_string());
        let o = snls(&args, &out);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).exists(), "{args:?}");
        let m = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
        assert!(m.contains(&format!("command = \"{}\"", args[0])));
    }
    let mut args = vec!["report", "--n-samples", "8", "--T", "0.5", "--eps-grid", "0.1,0.05"];
    args.extend_from_slice(SMALL);
    let o = snls(&args, &dir.path().join("report"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
