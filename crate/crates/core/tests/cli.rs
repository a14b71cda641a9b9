use std::fs;
use std::io::Cursor;
use std::path::Path;

use disentangle::cli::run;
use disentangle::corpus::{corpus_stats, load_dir, AnnotationOptions};
use disentangle::decoder::decode_file;
use disentangle::trainer::evaluate;
use disentangle::Model;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str], input: &str) -> Out {
    let mut argv = vec!["disentangle"];
    argv.extend_from_slice(args);
    let mut stdin = Cursor::new(input.as_bytes().to_vec());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut stdin, &mut out, &mut err);
    Out {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, threads: &str, utterances: &str, seed: &str) {
    let r = cli(
        &["gen-synth", "--out", p(dir), "--threads", threads, "--utterances", utterances, "--seed", seed],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
}

const TINY: &str = "hidden = 4\nembed_dim = 4\nwindow = 6\nepochs = 2\nlearning_rate = 0.01\n";

#[test]
fn usage_errors_exit_one() {
    let r = cli(&["stats", "--bogus"], "");
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("--bogus"));
    assert!(r.stdout.is_empty());
    assert_eq!(cli(&[], "").code, 1);
    assert_eq!(cli(&["frobnicate"], "").code, 1);
    let help = cli(&["--help"], "");
    assert_eq!(help.code, 0);
    for sub in ["train", "eval", "tune-threshold", "disentangle", "stats", "gen-synth"] {
        assert!(help.stdout.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn gen_synth_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "3", "60", "7");
    synth(b.path(), "3", "60", "7");
    for name in ["synthetic.ascii.txt", "synthetic.annotation.txt"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    assert_eq!(fs::read_to_string(a.path().join("synthetic.ascii.txt")).unwrap().lines().count(), 60);
}

#[test]
fn stats_prints_corpus_statistics() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5", "50", "3");
    let r = cli(&["stats", "--data", p(dir.path())], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let json: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let files = load_dir(dir.path(), &AnnotationOptions::default()).unwrap();
    let expect = corpus_stats(&files).unwrap();
    assert_eq!(json["total_links"], expect.total_links);
    assert_eq!(json["total_links"], 50);
    assert_eq!(json["total_conversations"], 5);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["stats", "--data", p(&dir.path().join("missing"))], "").code, 2);
    assert_eq!(cli(&["stats", "--data", p(dir.path())], "").code, 2);
    fs::write(dir.path().join("x.ascii.txt"), "[10:00] <a> hi\n").unwrap();
    fs::write(dir.path().join("x.annotation.txt"), "0 5 -\n").unwrap();
    let r = cli(&["stats", "--data", p(dir.path())], "");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("error"));
}

#[test]
fn train_eval_tune_and_stream() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    let out = root.path().join("run");
    synth(&data, "3", "24", "5");
    let config = root.path().join("tiny.toml");
    fs::write(&config, TINY).unwrap();

    let r = cli(
        &["train", "--data", p(&data), "--dev", p(&data), "--config", p(&config), "--out", p(&out), "--seed", "4"],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);
    assert_eq!(report["epochs"][1]["epoch"], 2);
    for f in ["model.ckpt", "best.ckpt", "last.ckpt", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(r.stderr.contains("epoch   1"));

    let model_path = out.join("model.ckpt");
    let (model, _) = Model::load(&model_path).unwrap();
    let files = load_dir(&data, &AnnotationOptions::default()).unwrap();

    let r = cli(&["eval", "--model", p(&model_path), "--data", p(&data), "--self-link-threshold", "0"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let json: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let plain = evaluate(&model, &files, 0.0).unwrap();
    assert_eq!(json, serde_json::to_value(&plain).unwrap());
    assert!(r.stderr.contains("VI"));

    assert_eq!(cli(&["eval", "--model", p(&model_path), "--data", p(&data), "--self-link-threshold", "2"], "").code, 1);

    let tuned = root.path().join("tuned.ckpt");
    let r = cli(
        &["tune-threshold", "--model", p(&model_path), "--data", p(&data), "--grid", "0.3", "--out", p(&tuned)],
        "",
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let sweep: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(sweep["best"], 0.3);
    assert_eq!(Model::load(&tuned).unwrap().0.threshold, 0.3);

    let log = fs::read_to_string(data.join("synthetic.ascii.txt")).unwrap();
    let r = cli(&["disentangle", "--model", p(&model_path), "--self-link-threshold", "0"], &log);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(rows[0], "index\tparent\tthread\ttime\tspeaker\ttext");
    assert_eq!(rows.len(), 25);
    let links = decode_file(&model, &files[0].utterances, 0.0).unwrap();
    for (row, link) in rows[1..].iter().zip(&links) {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), link.child);
        assert_eq!(cols[1].parse::<usize>().unwrap(), link.parent);
    }

    let from_file = cli(
        &["disentangle", "--model", p(&model_path), "--data", p(&data.join("synthetic.ascii.txt")), "--self-link-threshold", "0"],
        "",
    );
    assert_eq!(from_file.stdout, r.stdout);
}

#[test]
fn stream_reports_bad_lines() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    synth(&data, "2", "10", "1");
    let config = root.path().join("tiny.toml");
    fs::write(&config, "hidden = 2\nembed_dim = 2\nwindow = 3\nepochs = 1\n").unwrap();
    let out = root.path().join("run");
    assert_eq!(cli(&["train", "--data", p(&data), "--config", p(&config), "--out", p(&out)], "").code, 0);
    let model = out.join("model.ckpt");
    let r = cli(&["disentangle", "--model", p(&model)], "[10:00] <a> hi\n\nnot a log line\n");
    assert_eq!(r.code, 2);
    assert_eq!(r.stdout.lines().count(), 2);
    assert!(r.stderr.contains("line 3"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    synth(&data, "2", "10", "1");
    let config = root.path().join("bad.toml");
    fs::write(&config, "learning_rat = 0.1\n").unwrap();
    let r = cli(&["train", "--data", p(&data), "--config", p(&config), "--out", p(&root.path().join("o"))], "");
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("learning_rat"));
}
