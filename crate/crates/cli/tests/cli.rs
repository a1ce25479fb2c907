use std::path::Path;
use std::process::{Command, Output};

use shindo::geo::{point_to_cell, GeoPoint, GridSpec};
use shindo::grid::IntensityGrid;
use shindo::linmodel::{load_model, ModelParams};

fn shindo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shindo")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = shindo(dir, args);
    assert!(out.status.success(), "shindo {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL: [&str; 4] = ["--rows", "8", "--cols", "8"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

/// Synthetic 8x8 catalog, split and AVS30 grid in a fresh directory.
fn workspace(events: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &with_small(&["synth", "--events", events, "--output", "cat.jsonl", "--split-out", "split.txt", "--avs30-out", "avs.csv", "--seed", "2"]),
    );
    dir
}

const THREE_EVENTS: &str = r#"{"id":"a","time":"2003-05-26T09:24:33Z","lat":38.8,"lon":141.7,"depth_km":71,"mag":7.1,"obs":[[38.9,141.6,6.1]]}
{"id":"b","time":"1997-03-26T08:31:00Z","lat":32.0,"lon":130.4,"depth_km":8,"mag":6.6,"obs":[]}
{"id":"c","time":"2016-04-14T12:26:00Z","lat":32.7,"lon":130.8,"depth_km":11,"mag":6.5,"obs":[[32.8,130.8,6.7]]}
{"id":"small","time":"2001-01-01T00:00:00Z","lat":35.0,"lon":135.0,"depth_km":10,"mag":4.9,"obs":[]}
"#;

#[test]
fn ingest_reports_summary_and_skips_small_events() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.jsonl"), THREE_EVENTS).unwrap();
    let out = shindo(dir.path(), &["ingest", "--input", "in.jsonl", "--output", "out.jsonl"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("events: 3"), "{stdout}");
    assert!(stdout.contains("dates: 1997-03-26 to 2016-04-14"), "{stdout}");
    assert!(stdout.contains("skipped: 1"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("small"));
    let written = std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    let ids: Vec<&str> = written.lines().map(|l| &l[7..8]).collect();
    assert_eq!(ids, ["b", "a", "c"]);
}

#[test]
fn ingest_parse_error_names_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = THREE_EVENTS.replace("\"depth_km\":8", "\"depth_km\":\"deep\"");
    std::fs::write(dir.path().join("bad.jsonl"), bad).unwrap();
    let out = shindo(dir.path(), &["ingest", "--input", "bad.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl:2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&shindo(dir.path(), &["train", "--no-such-flag"])), 2);
    assert_eq!(code(&shindo(dir.path(), &["train"])), 2);
    assert_eq!(code(&shindo(dir.path(), &["predict", "--mode", "regression", "--lat", "35", "--lon", "135", "--depth", "10", "--mag", "6", "--output", "x.csv"])), 2);
    assert_eq!(code(&shindo(dir.path(), &["nope"])), 2);
}

#[test]
fn regression_training_is_deterministic_and_loadable() {
    let dir = workspace("10");
    let d = dir.path();
    let args = |out: &'static str| with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--kind", "regression", "--epochs", "4", "--seed", "3", "--output", out]);
    ok(d, &args("a.bin"));
    ok(d, &args("b.bin"));
    assert_eq!(std::fs::read(d.join("a.bin")).unwrap(), std::fs::read(d.join("b.bin")).unwrap());
    let m: ModelParams<f32> = load_model(d.join("a.bin")).unwrap();
    assert_eq!(m.encoder.k, 5);
    assert_eq!(m.out_dim, 64);
}

#[test]
fn classification_log_has_validation_column() {
    let dir = workspace("30");
    let d = dir.path();
    ok(d, &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--k", "5", "--epochs", "3", "--output", "cls.bin", "--log", "log.csv"]));
    let log = std::fs::read_to_string(d.join("log.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_metric"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 3);
        fields[2].parse::<f64>().unwrap();
    }
}

#[test]
fn sweep_reports_every_odd_k_and_the_best() {
    let dir = workspace("30");
    let out = ok(dir.path(), &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--kind", "regression", "--epochs", "2", "--sweep-k", "1:7:2", "--sweep-out", "sweep.csv"]));
    assert!(out.contains("best k:"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "3", "5", "7"]);
}

#[test]
fn non_finite_training_exits_3() {
    let dir = workspace("10");
    let out = shindo(dir.path(), &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--kind", "regression", "--epochs", "3", "--lr", "1e38", "--output", "x.bin"]));
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn kumamoto_baseline_peaks_at_the_epicenter() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["predict", "--mode", "gmpe", "--lat", "32:42.0", "--lon", "130:46.6", "--depth", "7", "--mag", "6.4", "--uniform-avs30", "400", "--output", "k.csv", "--render", "k.ppm"]);
    assert!(out.contains("max intensity"));
    let spec = GridSpec::default();
    let grid: IntensityGrid<f64> = IntensityGrid::load_csv(d.join("k.csv"), spec).unwrap();
    let epi = point_to_cell(GeoPoint { lat: 32.7, lon: 130.0 + 46.6 / 60.0 }, &spec).unwrap();
    assert_eq!(grid.argmax(), epi);
    assert!(std::fs::read(d.join("k.ppm")).unwrap().starts_with(b"P6\n512 512\n255\n"));
}

#[test]
fn outside_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = shindo(dir.path(), &["gmpe", "--lat", "10", "--lon", "100", "--depth", "10", "--mag", "6", "--uniform-avs30", "400", "--output", "x.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
}

#[test]
fn hybrid_with_class_zero_classifier_is_all_zero() {
    let dir = workspace("10");
    let d = dir.path();
    // lr 0 keeps the zero initialization: uniform softmax, ties resolve to class 0
    ok(d, &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--k", "3", "--epochs", "1", "--lr", "0", "--output", "cls.bin"]));
    ok(d, &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--kind", "regression", "--epochs", "5", "--output", "reg.bin"]));
    ok(d, &["predict", "--mode", "hybrid", "--reg-model", "reg.bin", "--cls-model", "cls.bin", "--lat", "36", "--lon", "138", "--depth", "10", "--mag", "7", "--output", "h.csv"]);
    let grid: IntensityGrid<f64> = IntensityGrid::load_csv(d.join("h.csv"), GridSpec::square(8).unwrap()).unwrap();
    assert!(grid.values().iter().all(|v| *v == 0.0));
    ok(d, &["predict", "--mode", "regression", "--model", "reg.bin", "--lat", "36", "--lon", "138", "--depth", "10", "--mag", "7", "--output", "r.csv"]);
    let reg: IntensityGrid<f64> = IntensityGrid::load_csv(d.join("r.csv"), GridSpec::square(8).unwrap()).unwrap();
    assert!(reg.values().iter().any(|v| *v != 0.0));
}

#[test]
fn evaluate_self_test_is_perfect() {
    let dir = workspace("20");
    let d = dir.path();
    ok(d, &with_small(&["evaluate", "--catalog", "cat.jsonl", "--split", "split.txt", "--self-test", "--report", "r.json", "--dump-pairs", "pairs.csv"]));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let gt = &report["ground-truth"];
    assert_eq!(gt["pearson_r"], 1.0);
    assert_eq!(gt["f1_binary"], 1.0);
    assert_eq!(gt["mcc_multiclass"], 1.0);
    let test_events = std::fs::read_to_string(d.join("split.txt")).unwrap().lines().skip_while(|l| *l != "[test]").skip(1).count();
    let pairs = std::fs::read_to_string(d.join("pairs.csv")).unwrap();
    assert_eq!(pairs.lines().next(), Some("pred_class,true_class"));
    assert_eq!(pairs.lines().count() - 1, test_events * 64);
    assert_eq!(gt["n_cells_evaluated"], (test_events * 64) as u64);
}

#[test]
fn comparison_table_has_four_models_and_three_metrics() {
    let dir = workspace("30");
    let d = dir.path();
    ok(d, &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--k", "5", "--epochs", "3", "--output", "cls.bin"]));
    ok(d, &with_small(&["train", "--catalog", "cat.jsonl", "--split", "split.txt", "--kind", "regression", "--epochs", "3", "--output", "reg.bin"]));
    let out = ok(d, &with_small(&["evaluate", "--catalog", "cat.jsonl", "--split", "split.txt", "--reg-model", "reg.bin", "--cls-model", "cls.bin", "--avs30", "avs.csv", "--report", "r.json", "--dump-pairs", "p.csv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["model", "r", "F1", "MCC"]);
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["gmpe", "classification", "regression", "hybrid"]);
    assert!(lines[1..].iter().all(|l| l.split_whitespace().count() == 4));
    for m in names {
        assert!(d.join(format!("p.{m}.csv")).exists());
    }
}

#[test]
fn render_is_deterministic_and_zero_grid_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let zero_row = ["0"; 8].join(",");
    std::fs::write(d.join("z.csv"), vec![zero_row; 8].join("\n")).unwrap();
    for out in ["a.ppm", "b.ppm"] {
        ok(d, &with_small(&["render", "--grid-file", "z.csv", "--block", "2", "--output", out]));
    }
    let a = std::fs::read(d.join("a.ppm")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.ppm")).unwrap());
    let header = b"P6\n16 16\n255\n";
    assert!(a.starts_with(header));
    assert!(a[header.len()..].iter().all(|&b| b == 0));
    std::fs::write(d.join("bad.csv"), "1,2,x\n").unwrap();
    assert_eq!(code(&shindo(d, &with_small(&["render", "--grid-file", "bad.csv", "--output", "c.ppm"]))), 2);
}

#[test]
fn config_file_overrides_flags() {
    let dir = workspace("10");
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "seed = 3\n[train]\nepochs = 2\nkind = \"regression\"\n").unwrap();
    ok(d, &with_small(&["train", "--config", "c.toml", "--catalog", "cat.jsonl", "--split", "split.txt", "--epochs", "50", "--output", "a.bin", "--log", "a.csv"]));
    assert_eq!(std::fs::read_to_string(d.join("a.csv")).unwrap().lines().count(), 3);
    std::fs::write(d.join("c.json"), r#"{"train": {"epochs": 2, "kind": "regression"}, "seed": 3}"#).unwrap();
    ok(d, &with_small(&["train", "--config", "c.json", "--catalog", "cat.jsonl", "--split", "split.txt", "--seed", "8", "--output", "b.bin"]));
    assert_eq!(std::fs::read(d.join("a.bin")).unwrap(), std::fs::read(d.join("b.bin")).unwrap());
    std::fs::write(d.join("bad.toml"), "[train]\nepoch = 2\n").unwrap();
    let out = shindo(d, &with_small(&["train", "--config", "bad.toml", "--catalog", "cat.jsonl", "--output", "c.bin"]));
    assert_eq!(code(&out), 2);
}
