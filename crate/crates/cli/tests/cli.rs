use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use eigensector::rmt::mp_bounds;
use eigensector::synth::MarketSpec;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigensector"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TOY: &str = "\
date,asset,price
2021-01-04,X,10.0
2021-01-04,Y,20.0
2021-01-05,X,10.5
2021-01-05,Y,19.0
2021-01-06,X,10.2
2021-01-06,Y,19.5
2021-01-07,X,10.8
2021-01-07,Y,19.1
2021-01-08,X,10.6
2021-01-08,Y,19.9
";

#[test]
fn two_asset_smoke() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), TOY).unwrap();
    let out = run(
        dir.path(),
        &["analyze", "--input", "toy.csv", "--out-dir", "a"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(dir.path().join("a/spectrum.json"));
    assert_eq!(r["result"]["data"]["n_assets"], 2);
    assert_eq!(r["result"]["data"]["n_observations"], 4);
    assert_eq!(r["result"]["eigenvalues"].as_array().unwrap().len(), 2);
    assert_eq!(r["config"]["inputs"][0], "toy.csv");
    for f in ["correlation.csv", "correlation.json", "eigenvalues.csv"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn constant_asset_is_dropped_with_flag() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = TOY.to_string();
    for d in 4..=8 {
        text.push_str(&format!("2021-01-0{d},Z,3.0\n"));
    }
    fs::write(dir.path().join("p.csv"), text).unwrap();
    let out = run(
        dir.path(),
        &["analyze", "--input", "p.csv", "--out-dir", "a"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('Z'));

    let out = run(
        dir.path(),
        &[
            "analyze",
            "--input",
            "p.csv",
            "--drop-zero-variance",
            "--out-dir",
            "a",
        ],
    );
    assert!(out.status.success());
    let r = json(dir.path().join("a/spectrum.json"));
    assert_eq!(
        r["result"]["data"]["dropped_zero_variance"],
        serde_json::json!(["Z"])
    );
    assert_eq!(r["result"]["data"]["n_assets"], 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("dropped: Z"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dir.path(), &["analyze", "--bogus"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(dir.path(), &["analyze", "--input", "missing.csv"])
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("neg.csv"), TOY.replace("10.5", "-5.0")).unwrap();
    let out = run(dir.path(), &["analyze", "--input", "neg.csv"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("toy.csv"), TOY).unwrap();
    let out = run(
        dir.path(),
        &["analyze", "--input", "toy.csv", "--margin", "0.5"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(run(dir.path(), &["--help"]).status.success());
}

fn synth_panel(dir: &Path, spec: &MarketSpec) {
    fs::write(dir.join("spec.toml"), spec.to_toml().unwrap()).unwrap();
    let out = run(dir, &["synth", "--spec", "spec.toml", "--out-dir", "syn"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_then_analyze_reports_consistent_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = MarketSpec::planted_pair(4);
    spec.n_observations = 600;
    synth_panel(dir.path(), &spec);
    let out = run(
        dir.path(),
        &[
            "analyze",
            "--input",
            "syn/panel.csv",
            "--format",
            "wide",
            "--out-dir",
            "a",
        ],
    );
    assert!(out.status.success());
    let r = json(dir.path().join("a/spectrum.json"));
    let q = r["result"]["aspect_ratio"].as_f64().unwrap();
    assert_eq!(q, 600.0 / 50.0);
    let law = mp_bounds(q).unwrap();
    let lo = r["result"]["law"]["lambda_min"].as_f64().unwrap();
    let hi = r["result"]["law"]["lambda_max"].as_f64().unwrap();
    assert!((lo - law.lambda_min).abs() < 1e-10);
    assert!((hi - law.lambda_max).abs() < 1e-10);
    let sig = r["result"]["significant"]["indices"].as_array().unwrap();
    assert!(sig.len() >= 2);
}

#[test]
fn sectors_label_planted_halves() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path(), &MarketSpec::planted_pair(1));
    let base = [
        "sectors",
        "--input",
        "syn/panel.csv",
        "--format",
        "wide",
        "--u-c",
        "0.15",
    ];
    let mut args = base.to_vec();
    args.extend(["--metadata", "syn/metadata.csv", "--out-dir", "s"]);
    let out = run(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(dir.path().join("s/sectors.json"));
    let rows = r["result"]["table"]["rows"].as_array().unwrap();
    let planted: Vec<&Value> = rows.iter().filter(|r| r["mode_index"] == 1).collect();
    assert_eq!(planted.len(), 2);
    let mut cats: Vec<&str> = planted
        .iter()
        .map(|r| r["dominant_category"].as_str().unwrap())
        .collect();
    cats.sort();
    assert_eq!(cats, ["block0_neg", "block0_pos"]);
    for r in planted {
        assert_eq!(r["matched"], 10);
        assert_eq!(r["total"], 10);
    }

    let mut args = base.to_vec();
    args.extend(["--out-dir", "u"]);
    let out = run(dir.path(), &args);
    assert!(out.status.success());
    let r = json(dir.path().join("u/sectors.json"));
    for row in r["result"]["table"]["rows"].as_array().unwrap() {
        assert_eq!(row["dominant_category"], "Unlabeled");
    }
    let csv = fs::read_to_string(dir.path().join("u/sectors.csv")).unwrap();
    assert!(csv.starts_with("mode,eigenvalue,threshold,side,category,fraction"));
}

#[test]
fn anticorr_writes_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = MarketSpec::planted_pair(2);
    spec.n_assets = 30;
    synth_panel(dir.path(), &spec);
    let out = run(
        dir.path(),
        &[
            "anticorr",
            "--input",
            "syn/panel.csv",
            "--format",
            "wide",
            "--u-c",
            "0.15",
            "--trials",
            "200",
            "--seed",
            "9",
            "--out-dir",
            "c",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let scan = fs::read_to_string(dir.path().join("c/mode_scan.csv")).unwrap();
    let header = scan.lines().next().unwrap();
    assert!(header.starts_with("mode,c_pm_raw,c_pm_pearson,baseline_mean,baseline_std"));
    let row1: Vec<&str> = scan.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row1[0], "1");
    let (pearson, mean, std): (f64, f64, f64) = (
        row1[2].parse().unwrap(),
        row1[3].parse().unwrap(),
        row1[4].parse().unwrap(),
    );
    assert!(pearson < mean - 3.0 * std);
    assert!(dir.path().join("c/mode_scan_full.csv").exists());
    assert!(dir.path().join("c/block_averages.csv").exists());
    let r = json(dir.path().join("c/anticorr.json"));
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(
        r["result"]["report"]["thresholded"]["rows"][0]["trials"],
        200
    );
}
