use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geodesy_core::estimators::{one_step, EstimatorOptions};
use geodesy_core::nuisance::{oracle_nuisances, Nuisances};
use geodesy_core::simbench::{true_effect_curve, Dgp};
use geodesy_core::{Family, PathSpec, TGrid};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodesy")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of an output CSV, skipping the header comment and the column line.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines.next().expect("column line").split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (cols, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (cols, rows) = table(text);
    let j = cols.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn write_sim7(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("data.csv");
    let data = Dgp::sim7().sample(n, seed).unwrap();
    geodesy::io::write_dataset(&path, &data, Some("# simulated")).unwrap();
    path
}

#[test]
fn truecurve_matches_the_library() {
    let out = run(&["truecurve", "--family", "hellinger", "--mc-n", "2000", "--t-step", "0.25", "--t-max", "0.75", "--seed", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# geodesy "));
    let dgp = Dgp::sim7();
    let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap();
    let grid = TGrid::new(vec![0.0, 0.25, 0.5, 0.75]).unwrap();
    let want = true_effect_curve(&dgp, &spec, &grid, 2000, 4).unwrap();
    let psi = column(&text, "psi");
    assert_eq!(psi.len(), 4);
    for (got, w) in psi.iter().zip(&want) {
        assert!((got - w.psi).abs() < 1e-12, "{got} vs {}", w.psi);
    }
}

#[test]
fn estimate_matches_the_library_and_starts_at_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = write_sim7(dir.path(), 300, 8);
    let path = data_path.to_str().unwrap();
    let out = run(&["estimate", "--data", path, "--oracle", "sim7", "--a-star", "5", "--t-step", "0.25", "--t-max", "0.75", "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let (cols, _) = table(&text);
    assert_eq!(cols, ["t", "psi_hat", "se", "ci_lo", "ci_hi", "chi_sq", "clipping_rate"]);

    let dgp = Dgp::sim7();
    let data = geodesy::io::read_dataset(&data_path, Some(dgp.support())).unwrap();
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 5.0).unwrap();
    let grid = TGrid::new(vec![0.0, 0.25, 0.5, 0.75]).unwrap();
    let nuis = Nuisances::Shared(oracle_nuisances(&dgp));
    let want = one_step(&data, &spec, &grid, &nuis, &EstimatorOptions::default()).unwrap();
    let psi = column(&text, "psi_hat");
    for (got, w) in psi.iter().zip(want.curve.iter()) {
        assert!((got - w.psi_hat).abs() < 1e-12, "{got} vs {}", w.psi_hat);
    }
    assert!((psi[0] - data.mean_y()).abs() < 1e-12);
}

#[test]
fn msm_writes_estimates_and_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let data = Dgp::msm6().sample(400, 3).unwrap();
    let data_path = dir.path().join("msm.csv");
    geodesy::io::write_dataset(&data_path, &data, None).unwrap();
    let out_path = dir.path().join("res").join("msm_out.csv");
    let out = run(&[
        "msm",
        "--data",
        data_path.to_str().unwrap(),
        "--oracle",
        "msm6",
        "--a-star",
        "2",
        "--t-cut",
        "0.2,0.3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("smallest trace"));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(column(&text, "t_cut"), [0.2, 0.3]);
    assert!(column(&text, "trace_vt").iter().all(|v| *v > 0.0));
    let beta = std::fs::read_to_string(dir.path().join("res").join("beta.csv")).unwrap();
    let (cols, rows) = table(&beta);
    assert_eq!(cols, ["t_cut", "basis", "term", "beta"]);
    assert_eq!(rows.len(), 6);
}

#[test]
fn missing_data_is_a_usage_error() {
    let out = run(&["estimate", "--a-star", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("data"), "{err}");
    assert!(err.contains("Usage: geodesy estimate"), "{err}");
}

#[test]
fn t_max_of_one_is_rejected() {
    let out = run(&["truecurve", "--t-max", "1.0", "--mc-n", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("t_max") && err.contains("below 1"), "{err}");
}

#[test]
fn each_violation_is_named() {
    let cases: [(&[&str], &str); 3] = [
        (&["--epsilon", "-0.1"], "epsilon"),
        (&["--folds", "1"], "folds"),
        (&["--t-max", "0.2", "--t-step", "0.5"], "t_step"),
    ];
    for (flags, key) in cases {
        let mut args = vec!["simulate", "--n", "50", "--reps", "2"];
        args.extend_from_slice(flags);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1));
        let err = stderr(&out);
        assert!(err.contains("(1 problem)") && err.contains(&format!("  {key}: ")), "{key}: {err}");
    }
    // All three at once are reported together.
    let out = run(&["simulate", "--epsilon", "0", "--folds", "1", "--t-max", "0.2", "--t-step", "0.5"]);
    let err = stderr(&out);
    assert!(err.contains("(3 problems)"), "{err}");
}

#[test]
fn config_files_are_checked_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# comment\nmc_n = 200\nt_step = 0.25\nt_max = 0.5\n").unwrap();
    let out = run(&["truecurve", "--config", cfg.to_str().unwrap(), "--t-max", "0.75"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(column(&String::from_utf8(out.stdout).unwrap(), "t"), [0.0, 0.25, 0.5, 0.75]);

    std::fs::write(&cfg, "mc_n = 200\nbandwidth = 3\n").unwrap();
    let out = run(&["truecurve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bandwidth") && err.contains("unknown key"), "{err}");
}

#[test]
fn output_header_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    let out = run(&[
        "simulate", "--n", "80", "--reps", "3", "--mode", "oracle", "--families", "w,e", "--t-step", "0.25", "--t-max",
        "0.5", "--truth-mc", "300", "--seed", "11", "--cache-dir", dir.path().join("cache").to_str().unwrap(), "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "simulate",
        "--config",
        first.to_str().unwrap(),
        "--threads",
        "2",
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    // Hellinger was not requested: its columns stay empty.
    let text = String::from_utf8(a).unwrap();
    let (cols, rows) = table(&text);
    let h = cols.iter().position(|c| c == "Hellinger_coverage").unwrap();
    assert!(rows.iter().all(|r| r[h].is_empty()));
    // A header from another command is refused.
    let out = run(&["truecurve", "--config", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,a,y\n0.1,0.5,1.0\n0.2,0.6,1.1\n0.3,oops,1.2\n").unwrap();
    let out = run(&["estimate", "--data", bad.to_str().unwrap(), "--a-star", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 4") && err.contains("oops"), "{err}");

    std::fs::write(&bad, "x1,y,a\n0.1,0.5,1.0\n").unwrap();
    let out = run(&["estimate", "--data", bad.to_str().unwrap(), "--a-star", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("header must be x1,...,xd,a,y"));

    let missing = dir.path().join("none.csv");
    let out = run(&["estimate", "--data", missing.to_str().unwrap(), "--a-star", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    let mut text = String::from("x1,a,y\n");
    for i in 0..60 {
        text.push_str(&format!("{},1,{}\n", i as f64 / 60.0, (i % 7) as f64));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&["estimate", "--data", path.to_str().unwrap(), "--support", "0,2", "--a-star", "1.5", "--t-max", "0.5", "--t-step", "0.25"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("numerical failure"));
}

#[test]
fn paths_table_has_one_row_per_point() {
    let out = run(&["paths", "--families", "w,h", "--points", "51", "--t-step", "0.5", "--t-max", "0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let (cols, rows) = table(&text);
    assert_eq!(cols, ["a", "t", "density", "family"]);
    assert_eq!(rows.len(), 2 * 2 * 51);
    // At t = 0 every family is the treatment density itself.
    let at0: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "0").collect();
    let (w, h): (Vec<&Vec<String>>, Vec<&Vec<String>>) = at0.into_iter().partition(|r| r[3] == "wasserstein");
    for (a, b) in w.iter().zip(&h) {
        assert_eq!(a[0], b[0]);
        let (da, db): (f64, f64) = (a[2].parse().unwrap(), b[2].parse().unwrap());
        assert!((da - db).abs() < 1e-10);
    }
}
