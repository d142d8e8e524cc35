//! End-to-end CLI checks, including the determinism acceptance criterion:
//! every subcommand with a fixed seed writes byte-identical outputs across
//! two runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sbirl")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn sbirl")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "sbirl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn assert_identical(a: &Path, b: &Path) {
    let fa = read_dir_files(a);
    let fb = read_dir_files(b);
    assert_eq!(
        fa.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        fb.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "file sets differ between {a:?} and {b:?}"
    );
    for ((name, ca), (_, cb)) in fa.iter().zip(&fb) {
        assert_eq!(ca, cb, "{name} differs between {a:?} and {b:?}");
    }
}

struct Workspace {
    root: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { root: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }

    fn dir_arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

#[test]
fn criterion_9_all_subcommands_byte_identical_across_reruns() {
    let ws = Workspace::new();
    for pass in ["a", "b"] {
        let synth = ws.dir_arg(&format!("synth_{pass}"));
        run_ok(&["synth", "--output", &synth, "--seed", "7"]);
        let corpus = format!("{synth}/corpus.jsonl");
        run_ok(&["label", "--input", &corpus, "--output", &ws.dir_arg(&format!("label_{pass}"))]);
        run_ok(&[
            "train",
            "--input",
            &corpus,
            "--output",
            &ws.dir_arg(&format!("train_{pass}")),
            "--variant",
            "graph",
            "--lambda",
            "0.001",
        ]);
        run_ok(&[
            "eval",
            "--input",
            &corpus,
            "--output",
            &ws.dir_arg(&format!("eval_{pass}")),
            "--lambda",
            "0.001",
        ]);
        run_ok(&[
            "ablate",
            "--input",
            &corpus,
            "--output",
            &ws.dir_arg(&format!("ablate_{pass}")),
            "--ns",
            "1,3,6",
            "--lambda",
            "0.001",
        ]);
    }
    for cmd in ["synth", "label", "train", "eval", "ablate"] {
        assert_identical(&ws.path(&format!("{cmd}_a")), &ws.path(&format!("{cmd}_b")));
    }
    println!("criterion 9 (every subcommand byte-identical across reruns): pass");
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    // Missing --output.
    assert_eq!(run(&["synth", "--seed", "1"]).status.code(), Some(2));
    // Bad variant value.
    let out = run(&["synth", "--output", &ws.dir_arg("o"), "--variant", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    // Gamma out of range.
    let out = run(&["synth", "--output", &ws.dir_arg("o"), "--gamma", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    // Ablate without --ns.
    let out = run(&["ablate", "--input", "x.jsonl", "--output", &ws.dir_arg("o")]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown subcommand (clap).
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn data_validation_errors_exit_3() {
    let ws = Workspace::new();
    let bad = ws.path("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let out = run(&["eval", "--input", bad.to_str().unwrap(), "--output", &ws.dir_arg("o")]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Corpus without any gold labels cannot train classifiers.
    let unlabeled = ws.path("unlabeled.jsonl");
    let mut lines = String::new();
    for seq in 0..4 {
        let (s, r) = if seq % 2 == 0 { ("p0", "p1") } else { ("p1", "p0") };
        lines.push_str(&format!(
            "{{\"game_id\":\"g0\",\"thread_id\":\"t0\",\"seq\":{seq},\"sender\":\"{s}\",\
             \"recipient\":\"{r}\",\"turn\":{seq},\"text\":\"hello well\",\
             \"sender_score\":{}.0,\"labels\":null}}\n",
            seq + 1
        ));
    }
    fs::write(&unlabeled, &lines).unwrap();
    let out =
        run(&["label", "--input", unlabeled.to_str().unwrap(), "--output", &ws.dir_arg("o2")]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "actionable message expected, got: {stderr}");
}

#[test]
fn numerical_errors_exit_4() {
    // Both players share identical message mixes, so per-player strategy
    // rates have zero variance and the correlation report must refuse.
    let ws = Workspace::new();
    let path = ws.path("flat.jsonl");
    let all = "\"labels\":{\"friendship\":1,\"reasoning\":1,\"game_move\":1,\"share_info\":1}";
    let none = "\"labels\":{\"friendship\":0,\"reasoning\":0,\"game_move\":0,\"share_info\":0}";
    let texts = ["friend because army news", "friend because army news", "hello well", "hello well"];
    let labels = [all, all, none, none];
    let mut lines = String::new();
    for seq in 0..4 {
        let (s, r) = if seq % 2 == 0 { ("p0", "p1") } else { ("p1", "p0") };
        lines.push_str(&format!(
            "{{\"game_id\":\"g0\",\"thread_id\":\"t0\",\"seq\":{seq},\"sender\":\"{s}\",\
             \"recipient\":\"{r}\",\"turn\":{seq},\"text\":\"{}\",\"sender_score\":1.0,{}}}\n",
            texts[seq], labels[seq]
        ));
    }
    fs::write(&path, &lines).unwrap();
    let out = run(&["label", "--input", path.to_str().unwrap(), "--output", &ws.dir_arg("o")]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let ws = Workspace::new();
    let config = ws.path("run.conf");
    fs::write(&config, "seed=1\nn_games=2\nthreads_per_game=4\n").unwrap();
    let out_dir = ws.dir_arg("synth");
    run_ok(&["synth", "--config", config.to_str().unwrap(), "--output", &out_dir, "--seed", "9"]);
    let corpus = fs::read_to_string(ws.path("synth/corpus.jsonl")).unwrap();
    let header = corpus.lines().next().unwrap();
    assert!(header.starts_with("# sbirl synth"), "header missing: {header}");
    assert!(header.contains("seed=9"), "flag should override config file: {header}");
    assert!(header.contains("n_games=2"), "config file value lost: {header}");
}

#[test]
fn label_covers_every_row_and_reports_are_shaped() {
    let ws = Workspace::new();
    let synth = ws.dir_arg("synth");
    run_ok(&["synth", "--output", &synth, "--seed", "3"]);
    let corpus = format!("{synth}/corpus.jsonl");
    let label_dir = ws.dir_arg("label");
    run_ok(&["label", "--input", &corpus, "--output", &label_dir]);
    let labeled = fs::read_to_string(ws.path("label/labeled.jsonl")).unwrap();
    for line in labeled.lines().filter(|l| !l.starts_with('#')) {
        assert!(line.contains("\"predicted\""), "row missing predictions: {line}");
        assert!(line.contains("\"action\""), "row missing action: {line}");
    }
    let f1 = fs::read_to_string(ws.path("label/f1.csv")).unwrap();
    assert_eq!(f1.lines().count(), 6, "header + csv header + 4 strategies");
    let corr = fs::read_to_string(ws.path("label/correlations.csv")).unwrap();
    assert_eq!(corr.lines().count(), 6, "header + csv header + 4 rows");
}

#[test]
fn eval_and_ablate_report_shapes() {
    let ws = Workspace::new();
    let synth = ws.dir_arg("synth");
    run_ok(&["synth", "--output", &synth, "--seed", "4"]);
    let corpus = format!("{synth}/corpus.jsonl");
    let eval_dir = ws.dir_arg("eval");
    run_ok(&["eval", "--input", &corpus, "--output", &eval_dir, "--lambda", "0.001"]);
    let summary = fs::read_to_string(ws.path("eval/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(2).collect();
    assert_eq!(rows.len(), 2, "one row per variant: {summary}");
    assert!(rows[0].starts_with("context-agnostic,"));
    assert!(rows[1].starts_with("graph-aware,"));
    assert!(ws.path("eval/detail_context.csv").exists());
    assert!(ws.path("eval/detail_graph.csv").exists());

    let abl_dir = ws.dir_arg("abl");
    run_ok(&["ablate", "--input", &corpus, "--output", &abl_dir, "--ns", "1,2,4", "--lambda", "0.001"]);
    let ablation = fs::read_to_string(ws.path("abl/ablation.csv")).unwrap();
    assert_eq!(ablation.lines().skip(2).count(), 6, "3 cutoffs x 2 variants: {ablation}");
}

#[test]
fn model_file_round_trips_and_respects_variant() {
    let ws = Workspace::new();
    let synth = ws.dir_arg("synth");
    run_ok(&["synth", "--output", &synth, "--seed", "5"]);
    let corpus = format!("{synth}/corpus.jsonl");
    let train_dir = ws.dir_arg("train");
    run_ok(&["train", "--input", &corpus, "--output", &train_dir, "--variant", "context", "--lambda", "0.001"]);
    let text = fs::read_to_string(ws.path("train/model.txt")).unwrap();
    let model = sbirl_core::sbirl::parse_model(&text).unwrap();
    assert_eq!(model.theta.len(), 5);
    assert_eq!(model.to_text(), text.lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
}
