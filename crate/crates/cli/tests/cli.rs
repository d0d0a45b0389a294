use std::process::{Command, Output};

fn crossfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossfuse")).args(args).output().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(crossfuse(&["--help"]).status.code(), Some(0));
    assert_eq!(crossfuse(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(crossfuse(&[]).status.code(), Some(64));
    assert_eq!(crossfuse(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(crossfuse(&["gen", "--seed", "minus-one"]).status.code(), Some(64));
}

#[test]
fn missing_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let r = crossfuse(&["--out", out, "register"]);
    assert_eq!(r.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&r.stderr);
    assert!(msg.contains("run the `extract` stage first") || msg.contains("run the `gen` stage first"), "{msg}");
    assert_eq!(crossfuse(&["--out", out, "--config", "/nonexistent.cfg", "gen"]).status.code(), Some(2));
}

#[test]
fn bad_config_key_exits_2_and_suggests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "rotaton_step_deg = 3\n").unwrap();
    let r = crossfuse(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "gen"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("rotation_step_deg"));
}

#[test]
fn gen_then_eval_prints_the_truth_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "scene_extent_m = 120\nbuildings = 3\nframe_stride = 0\n").unwrap();
    let base = ["--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--seed", "9"];
    assert!(crossfuse(&[&base[..], &["gen"]].concat()).status.success());
    let r = crossfuse(&[&base[..], &["eval"]].concat());
    assert!(r.status.success());
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("evaluation (seed 9)"));
    let row = text.lines().find(|l| l.contains("dsm_rmse_truth_self")).unwrap();
    assert!(row.contains("0.000000"), "{row}");
    let csv = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert!(csv.contains("dsm_rmse_truth_self,0,m,gen,9"), "{csv}");
}
