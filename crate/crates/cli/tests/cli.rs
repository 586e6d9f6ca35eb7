use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_talkprofiler"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", dir.to_str().unwrap(), "--speakers", "12", "--turns", "15"];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["stats", "x", "--by", "height"]).status.code(), Some(1));
    assert_eq!(run(&["split", "x", "--test-fraction", "1", "--out", "y"]).status.code(), Some(1));
    let o = bin().env("TALKPROFILER_THREADS", "zero").args(["stats", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["terms", "--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["stats", dir.path().join("none").to_str().unwrap()]).status.code(), Some(2));
    synth(dir.path(), &[]);
    fs::write(dir.path().join("broken.json"), "{\"conversation_id\": 3}").unwrap();
    let o = run(&["ingest", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.json"));
}

#[test]
fn stats_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let o = bin()
        .env("TALKPROFILER_THREADS", "2")
        .args(["stats", dir.path().to_str().unwrap(), "--by", "gender"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "category,speakers,words,turns,avg_turn_length,ttr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("female,12,"));
    assert!(lines[2].starts_with("male,12,"));
}

#[test]
fn terms_lists_top_k_per_category() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    synth(&corpus, &["--by", "age"]);
    let plot = dir.path().join("plot.csv");
    let o = run(&["terms", corpus.to_str().unwrap(), "--by", "age", "--top", "20", "--out", plot.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 40);
    assert_eq!(rows.iter().filter(|r| r.starts_with("old,")).count(), 20);
    assert_eq!(rows.iter().filter(|r| r.starts_with("young,")).count(), 20);
    let plot = fs::read_to_string(plot).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "term,count_a,count_b,pct_freq_a,pct_freq_b,sfs");
    // The planted characteristic words lead each side.
    assert!(rows[0].starts_with("old,1,old"));
    assert!(rows[20].starts_with("young,1,young"));
}

#[test]
fn synth_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), &["--seed", "7", "--signal", "nonlex"]);
    synth(b.path(), &["--seed", "7", "--signal", "nonlex"]);
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn synth_spec_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--emit-spec", "--speakers", "3", "--turns", "2"]);
    assert!(o.status.success());
    let mut spec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let path = dir.path().join("spec.json");
    fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = dir.path().join("c");
    let o = run(&["synth", "--spec", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("\"turns\": 12"));

    spec["categories"][0]["rates"]["laughter"] = 2.0.into();
    fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let o = run(&["synth", "--spec", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("laughter"));
}

fn ids(path: &Path) -> HashSet<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn split_manifests_partition_units() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    synth(&corpus, &[]);
    let out = dir.path().join("split");
    let o = run(&[
        "split", corpus.to_str().unwrap(), "--unit", "turn", "--folds", "3", "--test-fraction", "0.25",
        "--seed", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let train = ids(&out.join("train.txt"));
    let test = ids(&out.join("test.txt"));
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), 24 * 15);
    let folds: Vec<_> = (1..=3).map(|i| ids(&out.join(format!("fold_{i}.txt")))).collect();
    let union: HashSet<String> = folds.iter().flatten().cloned().collect();
    assert_eq!(union, train);
    assert_eq!(folds.iter().map(HashSet::len).sum::<usize>(), train.len());
}

#[test]
fn train_predict_evaluate_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    synth(&corpus, &[]);
    let c = corpus.to_str().unwrap();
    let model = dir.path().join("model.json");
    let o = run(&["train", c, "--vocab-size", "200", "--out", model.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["predict", c, "--model", model.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "id,speaker,category,probability,predicted");
    assert_eq!(text.lines().count(), 25);

    let o = run(&["evaluate", c, "--model", model.to_str().unwrap()]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["n_test"], 24);

    let first = dir.path().join("r1.json");
    let second = dir.path().join("r2.json");
    let o = run(&["evaluate", c, "--folds", "4", "--vocab-size", "200", "--seed", "3", "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["evaluate", "--config", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&first).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["config"]["evaluation"]["cross_validation"]["folds"], 4);
}

#[test]
fn tampered_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    synth(&corpus, &[]);
    let model = dir.path().join("model.json");
    let c = corpus.to_str().unwrap();
    assert!(run(&["train", c, "--vocab-size", "50", "--out", model.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(&model).unwrap();
    let tampered = text.replacen("\"seed\":0", "\"seed\":1", 1);
    assert_ne!(text, tampered);
    fs::write(&model, tampered).unwrap();
    let o = run(&["predict", c, "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash"));
}
