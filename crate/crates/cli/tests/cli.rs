use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sparsekit::io::{decode_tspt, encode_tspt, encode_tspw, PointCloud};
use sparsekit::tuner::toy_unet;
use sparsekit::WeightTensor;
use tempfile::TempDir;

fn sk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsekit"))
        .args(args)
        .env_remove("SPARSEKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sk(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Toy U-Net, seeded weights and a small planar cloud.
    fn unet(&self, points: usize) -> (PathBuf, PathBuf, PathBuf) {
        let (net, w, cloud) = (self.path("net.json"), self.path("w.tspw"), self.path("cloud.txt"));
        ok(&["gen", "unet", "--c-in", "1", "--width", "4", "--c-out", "2", "--out", p(&net)]);
        ok(&["gen", "weights", "--net", p(&net), "--seed", "3", "--out", p(&w)]);
        ok(&["gen", "cloud", "-n", &points.to_string(), "--seed", "5", "--extent", "2", "--out", p(&cloud)]);
        (net, w, cloud)
    }
}

/// CSV rows as maps from column name to value.
fn csv(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect()).collect()
}

#[test]
fn toy_cost_rows() {
    let out = ok(&["cost", "--toy"]);
    let rows = csv(&stdout(&out));
    let ig = |s: &str| rows.iter().find(|r| r["dataflow"] == "implicit_gemm" && r["splits"] == s).unwrap().clone();
    for (s, red) in [("0", "34"), ("1", "26"), ("3", "22")] {
        let r = ig(s);
        assert_eq!((r["effective_macs"].as_str(), r["redundant_macs"].as_str()), ("22", red), "s={s}");
    }
    assert_eq!(rows.len(), 2 + 5);
}

#[test]
fn cost_identity_and_neighbor_ratio() {
    let ws = Workspace::new();
    let cloud = ws.path("c.txt");
    ok(&["gen", "cloud", "-n", "20000", "--seed", "1", "--out", p(&cloud)]);
    let out = ok(&["cost", "--input", p(&cloud), "--splits", "0..5", "--channels", "4"]);
    let rows = csv(&stdout(&out));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let n = |k: &str| r[k].parse::<u64>().unwrap();
        assert_eq!(n("effective_macs") + n("redundant_macs"), n("charged_macs"));
        let ratio: f64 = r["neighbor_ratio"].parse().unwrap();
        assert!((3.0..=12.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn cost_of_an_empty_cloud_is_zero() {
    let ws = Workspace::new();
    let cloud = ws.path("empty.txt");
    ok(&["gen", "cloud", "-n", "0", "--out", p(&cloud)]);
    let net = ws.path("net.json");
    ok(&["gen", "unet", "--out", p(&net)]);
    let rows = csv(&stdout(&ok(&["cost", "--net", p(&net), "--input", p(&cloud)])));
    assert_eq!(rows.len(), 6 * 7);
    for r in rows {
        for (k, v) in r {
            if !["layer", "dataflow", "splits"].contains(&k.as_str()) {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{k}");
            }
        }
    }
}

#[test]
fn generated_clouds_are_deterministic() {
    let a = ok(&["gen", "cloud", "-n", "500", "--seed", "9", "--kind", "gaussian-clusters"]);
    let b = ok(&["gen", "cloud", "-n", "500", "--seed", "9", "--kind", "gaussian-clusters"]);
    assert_eq!(a.stdout, b.stdout);
    let empty = stdout(&ok(&["gen", "cloud", "-n", "0"]));
    assert!(!empty.is_empty());
    assert!(empty.lines().all(|l| l.starts_with('#')));
}

#[test]
fn identity_network_returns_its_input() {
    let ws = Workspace::new();
    let net = ws.path("id.json");
    std::fs::write(
        &net,
        r#"{"layers":[{"name":"id","kind":"conv","c_in":2,"c_out":2,"kernel_size":3}]}"#,
    )
    .unwrap();
    let w = ws.path("id.tspw");
    std::fs::write(&w, encode_tspw(&[WeightTensor::<f32>::identity(27, 2, 13)]).unwrap()).unwrap();
    let pts: Vec<f64> = (0..40).flat_map(|i| [(i % 5) as f64, (i / 5 % 4) as f64, (i / 20) as f64]).collect();
    let feats: Vec<f64> = (0..80).map(|i| i as f64 * 0.25 - 7.0).collect();
    let input = ws.path("in.tspt");
    std::fs::write(&input, encode_tspt(&PointCloud::new(3, pts.clone(), 2, feats.clone()).unwrap()).unwrap()).unwrap();
    let out = ws.path("out.tspt");
    for prec in ["f32", "f64"] {
        ok(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&input), "--out", p(&out), "--voxel", "1", "--precision", prec]);
        let y = decode_tspt(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(y.coords, pts);
        assert_eq!(y.features, feats, "{prec}");
    }
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(3000);
    let (a, b) = (ws.path("a.tspt"), ws.path("b.tspt"));
    for out in [&a, &b] {
        ok(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--out", p(out), "--deterministic", "--threads", "2"]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let y = decode_tspt(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(y.channels, 2);
}

#[test]
fn tuned_and_default_runs_agree() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(3000);
    let tuned = ws.path("tune.json");
    let t = ok(&[
        "tune", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--voxel", "0.05", "--warmup", "0", "--runs", "1", "--space",
        "igemm", "--out", p(&tuned),
    ]);
    assert!(stdout(&t).contains("implicit_gemm"));
    let (a, b) = (ws.path("a.tspt"), ws.path("b.tspt"));
    let default = ok(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--out", p(&a)]);
    assert!(stderr(&default).contains("warning"));
    let tuned_run = ok(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--out", p(&b), "--tune-result", p(&tuned)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let sa: Value = serde_json::from_slice(&default.stdout).unwrap();
    let sb: Value = serde_json::from_slice(&tuned_run.stdout).unwrap();
    assert_ne!(sa["groups"], sb["groups"]);
    assert_eq!(sa["timing"]["groups"].as_array().unwrap().len(), 3);
    assert!(sb["timing"]["total_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn training_tune_defaults_to_sparse_mapping() {
    let ws = Workspace::new();
    let (net, w, _) = ws.unet(10);
    let out = ok(&[
        "tune", "--net", p(&net), "--weights", p(&w), "--mode", "training", "--tune-samples", "1", "--points", "1500", "--extent", "2", "--warmup",
        "0", "--runs", "1", "--space", "ggs,fod",
    ]);
    assert!(stderr(&out).contains("note: no --scheme given; using sparse_mapping"));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["scheme"], "sparse_mapping");
    assert_eq!(r["log"].as_array().unwrap().len(), 2 * 3 * 2);
    assert!(r["groups"][0]["wgrad"].is_object());
}

/// Drops the fields that hold measured times.
fn mask_timing(mut v: Value) -> Value {
    v["latency_ms"] = Value::Null;
    v["tuning_wall_ms"] = Value::Null;
    for e in v["log"].as_array_mut().unwrap() {
        e["latency_ms"] = Value::Null;
    }
    v
}

#[test]
fn tune_reruns_match_except_timing() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(2000);
    let run = || {
        let o = ok(&[
            "tune", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--scheme", "workload", "--mode", "training", "--warmup", "0",
            "--runs", "1", "--space", "fod", "--seed", "4",
        ]);
        mask_timing(serde_json::from_slice(&o.stdout).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn empty_space_is_an_error() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(500);
    let out = sk(&["tune", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--space", ""]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("design space is empty"), "{}", stderr(&out));
}

#[test]
fn check_passes_on_a_fresh_build() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(1500);
    let out = ok(&["check", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--instances", "3", "--threads", "2"]);
    let text = stdout(&out);
    assert!(text.contains("check passed"));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2 * (6 + 3));
    assert!(!text.contains("FAIL"));
}

#[test]
fn corrupted_weights_are_a_parse_error() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(300);
    let mut bytes = std::fs::read(&w).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&w, &bytes).unwrap();
    let out = sk(&["check", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--instances", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("truncated"), "{}", stderr(&out));
}

#[test]
fn weights_for_another_network_are_rejected() {
    let ws = Workspace::new();
    let (_, _, cloud) = ws.unet(300);
    let net = ws.path("wide.json");
    std::fs::write(&net, toy_unet(1, 8, 2).to_json()).unwrap();
    let w = ws.path("w.tspw");
    let out = sk(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--out", p(&ws.path("y.tspt"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("layer `stem` expects 27x1x8"), "{err}");
}

#[test]
fn thread_flag_wins_over_environment() {
    let ws = Workspace::new();
    let (net, w, cloud) = ws.unet(300);
    let y = ws.path("y.tspt");
    let args = ["run", "--net", p(&net), "--weights", p(&w), "--input", p(&cloud), "--out", p(&y)];
    let bin = env!("CARGO_BIN_EXE_sparsekit");
    let env_only = Command::new(bin).args(args).env("SPARSEKIT_THREADS", "0").output().unwrap();
    assert_eq!(env_only.status.code(), Some(1));
    let flag = Command::new(bin).args(args).args(["--threads", "3"]).env("SPARSEKIT_THREADS", "0").output().unwrap();
    assert!(flag.status.success());
    let s: Value = serde_json::from_slice(&flag.stdout).unwrap();
    assert_eq!(s["workers"], 3);
    let env = Command::new(bin).args(args).env("SPARSEKIT_THREADS", "2").output().unwrap();
    let s: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(s["workers"], 2);
}

#[test]
fn bad_inputs_exit_with_validation_status() {
    let ws = Workspace::new();
    let (net, w, _) = ws.unet(300);
    let bad = ws.path("bad.txt");
    std::fs::write(&bad, "1 2\n").unwrap();
    let out = sk(&["run", "--net", p(&net), "--weights", p(&w), "--input", p(&bad), "--out", p(&ws.path("y.tspt"))]);
    assert_eq!(out.status.code(), Some(1));
    let missing = sk(&["run", "--net", p(&net), "--input", p(&bad), "--out", "y", "--tune-result", p(&ws.path("nope.json"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("reading tune result"));
}
