use std::path::Path;
use std::process::{Command, Output};

fn b2m(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_b2m"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn b2m")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).expect("machine-readable error line")
}

fn small_memory_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{
            "task": "memory",
            "alphas": [0, 0.1],
            "seeds": [0, 1],
            "teachers": ["oracle", "noise"],
            "epochs": 2,
            "memory": {"train_sequences": 8, "test_sequences": 20}
        }"#,
    )
    .unwrap();
    path
}

#[test]
fn run_memory_smoke_writes_one_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = b2m(
        &[
            "run-memory",
            "--alpha",
            "0",
            "--seed",
            "1",
            "--epochs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 1);
    let path = files[0].as_ref().unwrap().path();
    let run: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    assert_eq!(run["seed"], 1);
    assert_eq!(run["teacher"], "none");
    assert_eq!(run["epochs"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"task": "memory", "memory": {"train_sequences": "many"}}"#,
    )
    .unwrap();
    let o = b2m(
        &["run-memory", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "config");
    assert!(
        err["key"]
            .as_str()
            .unwrap()
            .contains("memory.train_sequences"),
        "{err}"
    );

    std::fs::write(&cfg, r#"{"task": "memory", "alphas": [0.5, 2.0]}"#).unwrap();
    let o = b2m(
        &["run-memory", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["key"].as_str().unwrap().contains("alpha"));

    std::fs::write(&cfg, "{ not json").unwrap();
    let o = b2m(
        &["run-memory", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = b2m(&["run-memory", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");

    let o = b2m(&["run-memory", "--teacher", "telepathy"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = b2m(&["sweep"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_then_report_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_memory_config(dir.path());
    let out = dir.path().join("sweep");
    let o = b2m(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // cells: (0, none), (0.1, oracle), (0.1, noise)
    let o = b2m(&["report", "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,teacher,mean,sem,n_included,n_diverged,p_vs_alpha0"
    );
    assert_eq!(lines.count(), 3);
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 2);
    assert!(out.join("report.md").exists());
}

#[test]
fn scene_report_renders_panels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.json");
    std::fs::write(
        &cfg,
        r#"{"task": "scene", "alphas": [0], "seeds": [3], "epochs": 1,
            "scene": {"train_scenes": 16, "test_scenes": 8, "human_scenes": 16}}"#,
    )
    .unwrap();
    let out = dir.path().join("s");
    let o = b2m(
        &[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = b2m(
        &["report", "--out", out.to_str().unwrap(), "--panels"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let panel = std::fs::read(out.join("panels").join("a0-none-s3.pgm")).unwrap();
    assert!(panel.starts_with(b"P5\n"));
}
