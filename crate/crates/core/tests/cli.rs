use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soit2fnn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let out = dir.join("run");
    let text = format!(
        "name = \"small\"\nlength = 400\ntrain_len = 300\nn_clusters = 3\nepisode_max = 3\n\
         stage1_iterations = 20\nstage2_iterations = 20\noutput_dir = \"{}\"\n{extra}",
        out.display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn gen_data_mackey_glass_rows() {
    let out = run(&["gen-data", "--mackey-glass", "--tau", "30", "--x0", "1.2", "--len", "1500"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "timestamp,value");
    assert_eq!(lines.len(), 1501);
    let values: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(values.iter().all(|v| *v > 0.0 && *v < 2.0));
}

#[test]
fn gen_data_microgrid_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = run(&["gen-data", "--microgrid", "--days", "3", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = read(&path);
    assert_eq!(text.lines().next(), Some("timestamp,unmet_power,price"));
    assert_eq!(text.lines().count(), 73);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["gen-data"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["train", "-c", "/nonexistent/config.toml"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "t_g = 0.001\nt_r = 0.01\n").unwrap();
    let out = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T_r"));
}

#[test]
fn grad_check_passes() {
    let out = run(&["grad-check", "--seed", "5", "--configs", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("PASS seed=5 configs=10"));
}

#[test]
fn divergent_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "eta = 1e200\n");
    let out = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_eval_report_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let run_dir = dir.path().join("run");

    let out = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("test"), "{stdout}");
    for f in ["model.json", "manifest.json", "config.toml", "metrics.csv", "predictions.csv", "firing.csv", "learning_log.txt"] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let metrics = read(run_dir.join("metrics.csv"));
    assert!(metrics.starts_with("split,step,lead,rmse,mpe\n"));
    assert!(metrics.contains("test,avg,"));
    assert!(read(run_dir.join("learning_log.txt")).contains("episode=1 "));

    let before = read(run_dir.join("metrics.csv"));
    let out = run(&["eval", "-c", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(run_dir.join("metrics.csv")), before);

    std::fs::remove_file(run_dir.join("firing.csv")).unwrap();
    assert!(run(&["report", "-c", cfg.to_str().unwrap()]).status.success());
    assert!(run_dir.join("firing.csv").exists());

    // Feed the first test windows back through `predict` and compare with predictions.csv.
    let preds = read(run_dir.join("predictions.csv"));
    let first_test = preds.lines().find(|l| l.starts_with("test,")).unwrap();
    let t: usize = first_test.split(',').nth(1).unwrap().parse().unwrap();
    let series = run(&["gen-data", "--mackey-glass", "--len", "400"]);
    let values: Vec<String> =
        String::from_utf8(series.stdout).unwrap().lines().skip(1).map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    let idx = t - 31;
    let row: Vec<String> = (1..=9).rev().map(|j| values[idx - 2 * j].clone()).collect();
    let input = dir.path().join("input.csv");
    let header: Vec<String> = (1..=9).rev().map(|j| format!("lag{}", 2 * j)).collect();
    std::fs::write(&input, format!("{}\n{}\n", header.join(","), row.join(","))).unwrap();
    let out = run(&["predict", "-m", run_dir.to_str().unwrap(), "-i", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let predicted: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let expected: Vec<f64> = first_test.split(',').skip(2).skip(1).step_by(2).map(|v| v.parse().unwrap()).collect();
    assert_eq!(predicted.len(), 3);
    for (p, e) in predicted.iter().zip(&expected) {
        assert!((p - e).abs() < 1e-12, "{p} vs {e}");
    }
}

#[test]
fn artifacts_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let cfg = small_config(dir.path(), "scheme = \"PM\"\n");
        assert!(run(&["train", "-c", cfg.to_str().unwrap()]).status.success());
    }
    for f in ["model_step1.json", "model_step2.json", "model_step3.json", "manifest.json", "metrics.csv", "predictions.csv", "firing.csv", "learning_log.txt"] {
        assert_eq!(read(a.path().join("run").join(f)), read(b.path().join("run").join(f)), "{f} differs");
    }
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run(&["train", "-c", cfg.to_str().unwrap(), "--output-dir", out_a.to_str().unwrap()]).status.success());
    assert!(run(&["train", "-c", cfg.to_str().unwrap(), "--output-dir", out_b.to_str().unwrap(), "--seed", "9"])
        .status
        .success());
    assert_ne!(read(out_a.join("model.json")), read(out_b.join("model.json")));
    assert!(read(out_b.join("config.toml")).contains("seed = 9"));
}
