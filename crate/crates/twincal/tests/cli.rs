use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use twincal::error::exit;

fn twincal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twincal"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env("TWINCAL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = twincal(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    twincal(dir, args).status.code().expect("exited normally")
}

/// A cut-down preset so full pipelines finish in seconds.
fn small_scene(dir: &Path, preset: &str, name: &str) -> PathBuf {
    ok(dir, &["scene-gen", "--preset", preset, "--out", "full.cfg"]);
    let text = fs::read_to_string(dir.join("full.cfg")).unwrap();
    let text: String = text
        .lines()
        .map(|l| match l.split(" = ").next() {
            Some("grid.extent.x") => "grid.extent.x = 40.0".to_string(),
            Some("grid.origin.y") => "grid.origin.y = -2.0".to_string(),
            Some("grid.extent.y") => "grid.extent.y = 24.0".to_string(),
            Some("scene.bs.antennas") => "scene.bs.antennas = 8".to_string(),
            _ => l.to_string(),
        })
        .map(|l| l + "\n")
        .collect();
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn pipeline(dir: &Path) {
    small_scene(dir, "canyon", "s.cfg");
    ok(dir, &["dataset", "--scene", "s.cfg", "--out", "grid.twc1"]);
    ok(dir, &["dataset", "--scene", "s.cfg", "--out", "eval.twc1", "--offgrid", "30", "--seed", "4"]);
    ok(dir, &[
        "train", "--data", "grid.twc1", "--out", "m.ckpt", "--log", "log.csv", "--epochs", "3", "--batch-size", "32",
        "--seed", "2",
    ]);
    ok(dir, &[
        "eval", "--data", "grid.twc1", "--eval", "eval.twc1", "--model", "m.ckpt", "--snr", "10", "--seed", "9", "--out",
        "metrics.csv",
    ]);
    ok(dir, &["heatmap", "--data", "grid.twc1", "--scene", "s.cfg", "--out", "heat.csv"]);
}

const ARTIFACTS: [&str; 8] = [
    "grid.twc1",
    "eval.twc1",
    "m.ckpt",
    "log.csv",
    "metrics.csv",
    "metrics_summary.csv",
    "metrics_cdf.csv",
    "heat.csv",
];

#[test]
fn pipeline_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for f in ARTIFACTS {
        let x = fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let metrics = fs::read_to_string(a.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "user,x,y,z,target,baseline,calibrated,grid_search,direct_baseline_channel"
    );
    assert_eq!(lines.count(), 30);
    let summary = fs::read_to_string(a.path().join("metrics_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    let cdf = fs::read_to_string(a.path().join("metrics_cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 1 + 5 * 200);
    let log = fs::read_to_string(a.path().join("log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "epoch,train_loss,val_loss");
    assert_eq!(log.lines().count(), 1 + 4);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_scene(d, "blocks", "s.cfg");
    ok(d, &["dataset", "--scene", "s.cfg", "--out", "a.twc1", "--offgrid", "50", "--seed", "3"]);
    let out = Command::new(env!("CARGO_BIN_EXE_twincal"))
        .args(["dataset", "--scene", "s.cfg", "--out", "b.twc1", "--offgrid", "50", "--seed", "3"])
        .current_dir(d)
        .env("TWINCAL_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(d.join("a.twc1")).unwrap(), fs::read(d.join("b.twc1")).unwrap());
}

#[test]
fn heatmap_of_open_scene_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["scene-gen", "--preset", "open", "--out", "open.cfg"]);
    ok(d, &["dataset", "--scene", "open.cfg", "--out", "g.twc1", "--no-channels"]);
    ok(d, &["heatmap", "--data", "g.twc1", "--scene", "open.cfg", "--out", "h.csv"]);
    let text = fs::read_to_string(d.join("h.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["x", "y", "rank_metric", "set_metric", "los", "same_paths"]
    );
    let mut rows = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(&r[2], "0");
        assert_eq!(&r[3], "0");
        assert_eq!(&r[4], "1");
        assert_eq!(&r[5], "1");
        rows += 1;
    }
    assert_eq!(rows, 31 * 21);
}

/// Identical twins with noiseless pilots: the baseline scores pick the target
/// beams for every user. The calibrated scores reproduce the target set for
/// most users; exact equality everywhere would need a perfect network.
#[test]
fn identity_gap_eval_matches_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_scene(d, "open", "s.cfg");
    ok(d, &["dataset", "--scene", "s.cfg", "--out", "g.twc1"]);
    ok(d, &["dataset", "--scene", "s.cfg", "--out", "e.twc1", "--offgrid", "50", "--seed", "3"]);
    ok(d, &["train", "--data", "g.twc1", "--mode", "sparse", "--out", "m.ckpt"]);
    ok(d, &[
        "eval", "--data", "g.twc1", "--eval", "e.twc1", "--model", "m.ckpt", "--snr", "inf", "--out", "r.csv",
    ]);
    let text = fs::read_to_string(d.join("r.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let (mut users, mut exact) = (0, 0);
    for r in rdr.records() {
        let r = r.unwrap();
        assert_eq!(&r[4], &r[5], "target vs baseline");
        let (t, c): (f64, f64) = (r[4].parse().unwrap(), r[6].parse().unwrap());
        assert!(t - c < 0.02, "user {}: target {t}, calibrated {c}", &r[0]);
        users += 1;
        exact += usize::from((t - c).abs() < 1e-6);
    }
    assert_eq!(users, 50);
    assert!(exact >= 40, "{exact} of {users} users match the target");
}

#[test]
fn bench_writes_positive_timings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_scene(d, "canyon", "s.cfg");
    ok(d, &["bench", "--scene", "s.cfg", "--repeat", "4", "--out", "t.csv"]);
    let text = fs::read_to_string(d.join("t.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["repeat", "target_trace_s", "baseline_trace_s", "inference_s"]
    );
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        for i in 1..4 {
            assert!(r[i].parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &[]), exit::USAGE);
    assert_eq!(code(d, &["scene-gen", "--preset", "nowhere", "--out", "x"]), exit::USAGE);
    assert_eq!(code(d, &["train", "--data", "x", "--out", "y", "--mode", "sparse", "--p", "0"]), exit::IO);
    assert_eq!(code(d, &["dataset", "--scene", "missing.cfg", "--out", "x.twc1"]), exit::IO);

    fs::write(d.join("bad.cfg"), "scene.bs.x = banana\n").unwrap();
    assert_eq!(code(d, &["dataset", "--scene", "bad.cfg", "--out", "x.twc1"]), exit::SCHEMA);
    fs::write(d.join("junk.twc1"), b"JUNKJUNKJUNKJUNK").unwrap();
    assert_eq!(code(d, &["train", "--data", "junk.twc1", "--out", "m.ckpt"]), exit::SCHEMA);

    small_scene(d, "canyon", "s.cfg");
    ok(d, &["dataset", "--scene", "s.cfg", "--out", "g.twc1"]);
    assert_eq!(
        code(d, &["train", "--data", "g.twc1", "--out", "m.ckpt", "--mode", "sparse", "--p", "7"]),
        exit::OTHER
    );
    assert_eq!(
        code(d, &["train", "--data", "g.twc1", "--out", "m.ckpt", "--epochs", "1", "--lr", "1e300"]),
        exit::DIVERGENCE
    );
    ok(d, &["train", "--data", "g.twc1", "--out", "m.ckpt", "--epochs", "1"]);
    // model for N = 16 against N = 8 data
    let text = fs::read_to_string(d.join("s.cfg")).unwrap().replace("antennas = 8", "antennas = 16");
    fs::write(d.join("s16.cfg"), text).unwrap();
    ok(d, &["dataset", "--scene", "s16.cfg", "--out", "g16.twc1"]);
    ok(d, &["train", "--data", "g16.twc1", "--out", "m16.ckpt", "--epochs", "1"]);
    assert_eq!(
        code(d, &["eval", "--data", "g.twc1", "--eval", "g.twc1", "--model", "m16.ckpt"]),
        exit::N_MISMATCH
    );
    assert_eq!(
        code(d, &["eval", "--data", "g16.twc1", "--eval", "g.twc1", "--model", "m.ckpt"]),
        exit::N_MISMATCH
    );
    assert_eq!(code(d, &["bench", "--scene", "s.cfg", "--model", "m16.ckpt", "--repeat", "1"]), exit::N_MISMATCH);
    assert_eq!(code(d, &["eval", "--data", "g.twc1", "--eval", "g.twc1", "--model", "g.twc1"]), exit::SCHEMA);
}
