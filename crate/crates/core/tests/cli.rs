//! Command-line behaviour: outputs, report files and exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pipesearch"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two skewed numeric features with a linear label.
fn write_data(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut text = String::from("x1,x2,label\n");
    for _ in 0..150 {
        let (u, v): (f64, f64) = (z.sample(&mut rng), z.sample(&mut rng));
        let label = if u + 0.5 * v > 0.0 { "pos" } else { "neg" };
        writeln!(text, "{},{},{label}", u.exp(), v.exp()).unwrap();
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn search(dir: &TempDir, data: &Path, extra: &[&str]) -> Output {
    run(bin()
        .args(["search", "--target", "label", "--advisor", "off", "--data"])
        .arg(data)
        .arg("--out")
        .arg(dir.path().join("run"))
        .args(extra))
}

fn value_after(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .trim()
        .to_string()
}

#[test]
fn search_writes_one_history_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = search(&dir, &data, &["--episodes", "5", "--max-len", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let history = std::fs::read_to_string(dir.path().join("run/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 6);
    for f in [
        "summary.json",
        "qtable.csv",
        "experience.jsonl",
        "rules.jsonl",
    ] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    assert_eq!(value_after(&stdout(&o), "advisor calls:"), "0");
}

#[test]
fn missing_target_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = run(bin().args(["search", "--data"]).arg(&data));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--target"));
}

#[test]
fn missing_data_file_is_a_data_error() {
    let o = run(bin().args(["search", "--target", "y", "--data", "/nonexistent/data.csv"]));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[search]\nmax_episode = 4\n").unwrap();
    let o = search(&dir, &data, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_supplies_settings() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[search]\nmax_episodes = 4\nmax_pipeline_len = 2\n").unwrap();
    let o = search(&dir, &data, &["--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let history = std::fs::read_to_string(dir.path().join("run/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 5);
}

#[test]
fn blank_pipeline_matches_raw_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let eval = |ops: &str| {
        let o = run(bin()
            .args(["eval-pipeline", "--target", "label", "--ops", ops, "--data"])
            .arg(&data));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        value_after(&stdout(&o), "validation accuracy:")
    };
    assert_eq!(eval("-1"), eval(""));
}

#[test]
fn eval_pipeline_names_operators() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = run(bin()
        .args([
            "eval-pipeline",
            "--target",
            "label",
            "--ops",
            "10,9,15",
            "--data",
        ])
        .arg(&data));
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(
        value_after(&out, "pipeline:"),
        "QuantileTransformer, StandardScaler, PolynomialFeatures"
    );
    assert_eq!(out.matches(" applied").count(), 3);
    let acc: f64 = value_after(&out, "validation accuracy:").parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn unknown_operator_id_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = run(bin()
        .args([
            "eval-pipeline",
            "--target",
            "label",
            "--ops",
            "99",
            "--data",
        ])
        .arg(&data));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("99"));
}

#[test]
fn operators_list_has_every_operator() {
    let o = run(bin().args(["operators", "list"]));
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "id,name,type");
    assert_eq!(lines.len(), 1 + 26);
    assert!(lines
        .iter()
        .any(|l| l.starts_with("10,QuantileTransformer,")));
}

#[test]
fn simulate_cost_prints_the_closed_form() {
    let o = run(bin().args([
        "simulate-cost",
        "--T",
        "50",
        "--p-stag",
        "0.2",
        "--c-llm",
        "100",
        "--c-rl",
        "1",
        "--K",
        "1",
        "--trials",
        "1000",
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(value_after(&out, "delta"), "3960");
    assert_eq!(value_after(&out, "cost_fixed"), "5000");
}

#[test]
fn distill_on_an_empty_pool_writes_no_rules() {
    let dir = tempfile::tempdir().unwrap();
    let pool = dir.path().join("pool.jsonl");
    std::fs::write(&pool, "").unwrap();
    let rules = dir.path().join("rules.jsonl");
    let o = run(bin()
        .args(["distill", "--pool"])
        .arg(&pool)
        .arg("--out")
        .arg(&rules));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&rules).unwrap(), "");
    assert_eq!(value_after(&stdout(&o), "rules:"), "0");
}

#[test]
fn distill_reads_a_search_pool() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let pool = dir.path().join("pool.jsonl");
    let o = search(
        &dir,
        &data,
        &[
            "--episodes",
            "10",
            "--max-len",
            "3",
            "--experience-pool",
            pool.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    let rules = dir.path().join("rules.jsonl");
    let o = run(bin()
        .args([
            "distill",
            "--min-support",
            "1",
            "--reward-quantile",
            "0.5",
            "--pool",
        ])
        .arg(&pool)
        .arg("--out")
        .arg(&rules));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let entries: usize = value_after(&stdout(&o), "pool entries:").parse().unwrap();
    assert!(entries >= 1);
    let o = run(bin()
        .args(["distill", "--reward-quantile", "2", "--out", "x", "--pool"])
        .arg(&pool));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_emits_history_and_qtable() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = search(&dir, &data, &["--episodes", "50", "--max-len", "3"]);
    assert!(o.status.success());
    let run_dir = dir.path().join("run");
    let o = run(bin().args(["report", "--run"]).arg(&run_dir));
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 51);
    assert!(out.starts_with("episode,accuracy,best_accuracy,epsilon,triggered,cumulative_calls"));
    let o = run(bin().args(["report", "--qtable", "--run"]).arg(&run_dir));
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(run_dir.join("qtable.csv")).unwrap()
    );
}
