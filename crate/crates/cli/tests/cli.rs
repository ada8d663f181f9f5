use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use entrisk::risk::gmm_risk;
use entrisk::RiskAversion;
use entrisk_cli::experiments::{example3_mixture, PROJECT_SCALES};

const INSTANCE: &str = "M = 2\nalpha0 = 2.0\nalphas = [2.5, 2.2]\ngammas = [[10.0, 0.45], [9.0, 0.43]]\nr = 0.5\nN = 40\nseed = 3\n";

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entrisk"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("ENTRISK_THREADS", t),
        None => cmd.env_remove("ENTRISK_THREADS"),
    };
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn values(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

#[test]
fn constant_losses_estimate_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.txt");
    fs::write(&file, "3.5\n".repeat(30)).unwrap();
    let rows = values(&ok(&["estimate", p(&file), "--reps", "40", "--alpha", "1.5"]));
    assert_eq!(rows.len(), 9);
    for (name, v) in rows {
        match name.as_str() {
            "SAA" | "LOOCV" | "OIC" | "MOM" | "BS" => assert_eq!(v, 3.5, "{name}"),
            _ => assert!((v - 3.5).abs() < 1e-3, "{name} gave {v}"),
        }
    }
}

#[test]
fn zero_radius_dro_is_the_empirical_risk() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.csv");
    fs::write(&file, "a,b\n1,2\n3,-1\n0.5,0.5\n").unwrap();
    let out = ok(&["dro", "linear", p(&file), "--z", "0.3,0.6", "--alpha", "1"]);
    let value: f64 = out.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    let losses: [f64; 3] = [0.3 + 1.2, 0.9 - 0.6, 0.15 + 0.3];
    let expected = (losses.iter().map(|l| l.exp()).sum::<f64>() / 3.0).ln();
    assert!((value - expected).abs() < 1e-12);
}

#[test]
fn fig1_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1");
    ok(&["experiment", "fig1", "--scale", "0.001", "--seed", "7", "--out", p(&out)]);
    for f in ["fig1_raw.csv", "fig1_summary.csv", "influence.csv", "influence_bins.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);

    let small = dir.path().join("small");
    ok(&["experiment", "fig1", "--reps", "1", "--sizes", "50", "--out", p(&small)]);
    let summary = fs::read_to_string(small.join("fig1_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let last: f64 = rows[4][2].parse().unwrap();
    assert_eq!(rows[4][0], "2");
    assert!((last - 3.2696323370).abs() < 1e-9);
}

#[test]
fn experiments_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = [Some("1"), Some("3"), Some("1")]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let out = dir.path().join(format!("run{i}"));
            let args = ["experiment", "example2", "--reps", "3", "--sizes", "200", "--boot", "20", "--match-iters", "30", "--out", p(&out)];
            assert!(run(&args, *t).status.success());
            out
        })
        .collect();
    for f in ["example2_raw.csv", "example2_summary.csv", "example2_truth.csv"] {
        let first = fs::read(runs[0].join(f)).unwrap();
        for r in &runs[1..] {
            assert_eq!(first, fs::read(r.join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn example3_manifest_records_true_risks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e3");
    ok(&["experiment", "example3", "--reps", "1", "--boot", "10", "--match-iters", "20", "--out", p(&out)]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let risks = manifest["details"]["true_risks"].as_array().unwrap();
    let alpha = RiskAversion::new(3.0).unwrap();
    for (entry, &c) in risks.iter().zip(&PROJECT_SCALES) {
        let expected = gmm_risk(&example3_mixture().scaled(c).unwrap(), alpha);
        assert!((entry["true_risk"].as_f64().unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn radius_tuning_and_pricing_from_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("inst.toml");
    fs::write(&cfg, INSTANCE).unwrap();
    let tuning = ["--folds", "4", "--eps-points", "3", "--eps-max", "1", "--reps", "20", "--match-iters", "20"];

    let mut args = vec!["tune-radius", "--config", p(&cfg), "--method", "BS_MATCH"];
    args.extend(tuning);
    let csv = ok(&args);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epsilon,rho_raw,rho_pooled,delta,rho_corrected,chosen");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1..].iter().filter(|l| l.ends_with(",1")).count(), 1);

    let mut args = vec!["insurance", "--config", p(&cfg), "--test-size", "2000"];
    args.extend(tuning);
    let csv = ok(&args);
    assert_eq!(csv.lines().count(), 4);

    let csv = ok(&["insurance", "--config", p(&cfg), "--eps", "0.2", "--test-size", "500"]);
    assert!(csv.lines().nth(1).unwrap().contains("FIXED"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1\nnot-a-number\n").unwrap();
    assert_eq!(run(&["estimate", p(&bad)], None).status.code(), Some(2));
    assert_eq!(run(&["experiment", "nope"], None).status.code(), Some(2));
    assert_eq!(run(&["estimate", p(&dir.path().join("missing.txt"))], None).status.code(), Some(3));
    let good = dir.path().join("good.txt");
    fs::write(&good, "1\n2\n").unwrap();
    let blocked = dir.path().join("no/such/dir/out.csv");
    assert_eq!(run(&["estimate", p(&good), "--estimators", "SAA", "--out", p(&blocked)], None).status.code(), Some(3));
    assert_eq!(run(&["estimate", p(&good)], Some("zero")).status.code(), Some(2));
}
