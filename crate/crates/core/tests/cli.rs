use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mrproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrproj"))
        .args(args)
        .env_remove("MRPROJ_THREADS")
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn write_dataset(path: &Path, n: usize) {
    let mut text = String::from("x1,y\n");
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        text.push_str(&format!("{x},{}\n", (6.0 * x).sin()));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn simulate_smoke_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = mrproj(&["simulate", "--signal", "blocks", "--reps", "2", "--n-raw", "600", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trials = read(&out.join("trials.csv"));
    assert_eq!(trials.lines().next(), Some("trial,n_effective,rel_rmse,seconds,regressions_total"));
    assert_eq!(trials.lines().count(), 3);
    assert!(read(&out.join("points.csv")).starts_with("x,y_true,y_noisy,eta_hat,j_at"));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert!(summary["median_rel_rmse"].as_f64().unwrap() > 0.0);
    assert!(out.join("config.resolved.json").exists());
}

#[test]
fn rerun_from_resolved_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let o = mrproj(&["simulate", "--reps", "2", "--n-raw", "500", "--seed", "5", "--out", first.to_str().unwrap()]);
    assert!(o.status.success());
    let second = dir.path().join("b");
    let config = first.join("config.resolved.json");
    let o = mrproj(&["--config", config.to_str().unwrap(), "simulate", "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["trials.csv", "points.csv", "summary.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    fs::write(&cfg, "# study\nseed = 3\nreps = 1\nn_raw = 400\n").unwrap();
    let out = dir.path().join("o");
    let o = mrproj(&["--config", cfg.to_str().unwrap(), "simulate", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved: serde_json::Value = serde_json::from_str(&read(&out.join("config.resolved.json"))).unwrap();
    assert_eq!(resolved["seed"], 9);
    assert_eq!(resolved["reps"], 1);
    assert_eq!(resolved["n-raw"], 400);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 200);
    let out = dir.path().join("o");
    let negative = mrproj(&["estimate", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--kappa", "-1"]);
    assert_eq!(negative.status.code(), Some(2));
    assert_eq!(mrproj(&["estimate", "--bogus"]).status.code(), Some(2));
    assert_eq!(mrproj(&["estimate", "--out", out.to_str().unwrap()]).status.code(), Some(2));

    // a regular file where the output directory should go
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let unwritable = blocker.join("out");
    let o = mrproj(&["estimate", "--data", data.to_str().unwrap(), "--out", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let missing = mrproj(&["estimate", "--data", "/nonexistent/d.csv", "--out", out.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn bad_dataset_header_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "x,y\n0.1,1\n").unwrap();
    let o = mrproj(&["estimate", "--data", data.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_and_adapt_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 1000);
    let out = dir.path().join("e");
    let o = mrproj(&["estimate", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--j", "4"]);
    assert!(o.status.success());
    let preds = read(&out.join("predictions.csv"));
    assert_eq!(preds.lines().next(), Some("x1,eta_hat,valid"));
    assert_eq!(preds.lines().count(), 1001);
    assert!(read(&out.join("fits.json")).contains("inverse_pi"));

    let out = dir.path().join("a");
    let o = mrproj(&["adapt", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--j", "2..6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let levels = read(&out.join("levels.csv"));
    assert!(levels.lines().skip(1).all(|l| {
        let j: u32 = l.rsplit(',').next().unwrap().parse().unwrap();
        (2..=6).contains(&j)
    }));
}

#[test]
fn maltese_covers_its_own_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, 800);
    let out = dir.path().join("m");
    let o = mrproj(&["maltese", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&out.join("summary.json"))).unwrap();
    assert_eq!(summary["anchored_fraction"], 1.0);
    assert!(summary["regressions"].as_u64().unwrap() <= 400);
    let odd = dir.path().join("odd.csv");
    write_dataset(&odd, 801);
    let o = mrproj(&["maltese", "--data", odd.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_decrease_in_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = mrproj(&["bounds", "--n", "2048,4096,8192,16384", "--j", "6", "--delta", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&out.join("bounds.csv"));
    let raw: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(raw.len(), 4);
    assert!(raw.windows(2).all(|w| w[1] <= w[0]), "{raw:?}");
    let below = mrproj(&["bounds", "--j", "3", "--delta", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(below.status.code(), Some(2));
}

#[test]
fn classify_and_bench_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = mrproj(&["classify", "--sizes", "256,512", "--reps", "3", "--probes", "500", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let risk = read(&out.join("risk.csv"));
    assert_eq!(risk.lines().next(), Some("n,theta,s,median_excess_risk,stderr,seed_base"));
    assert_eq!(risk.lines().count(), 3);

    let out = dir.path().join("bench");
    let o = mrproj(&["bench", "--levels", "3..4", "--n-raw", "400", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out.join("bench.csv")).lines().count(), 3);
}

#[test]
fn threads_env_fallback_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_mrproj"))
        .args(["bounds", "--out", "/tmp/unused-mrproj"])
        .env("MRPROJ_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
