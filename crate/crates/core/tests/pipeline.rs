use crossfuse::io::{parse_config, read_ply, RunConfig};
use crossfuse::pipeline::*;

fn small() -> RunConfig {
    parse_config("scene_extent_m = 120\nbuildings = 4\nvegetation = 2\nframe_stride = 20\n").unwrap()
}

#[test]
fn small_scene_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = RunDir::new(tmp.path());
    let cfg = small();
    let (report, timings) = run_pipeline(&dir, &cfg, 2).unwrap();
    assert_eq!(timings.len(), 6);
    let get = |k: &str| report.get(k).unwrap_or_else(|| panic!("missing {k}"));
    assert_eq!(get("dsm_rmse_truth_self"), 0.0);
    assert!(get("boundary_iou") >= 0.9);
    assert!(get("theta_error_deg") <= 3.0);
    assert!(get("t_error_m") <= 1.0);
    assert!(get("dz_error_m") <= 0.1);
    assert!(get("registration_rmse") < 1.0);
    assert!(get("manifold_edges_combined") >= 0.99);
    for f in [TEXTURED.to_string() + ".obj", REPORT_CSV.into(), REPORT_TXT.into(), TRANSFORMS.into()] {
        assert!(dir.path(&f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path(REPORT_CSV)).unwrap();
    assert!(csv.starts_with("metric,value,unit,stage,seed\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",2")));
    // registration keeps the point count and the dominant row reads back
    assert_eq!(read_ply(dir.path(REGISTERED)).unwrap().len(), read_ply(dir.path(GROUND)).unwrap().len());
    let t = read_dominant(&dir.path(TRANSFORMS)).unwrap();
    let want = drift_model(&cfg).t0.inverse();
    assert!((t.dz - want.dz).abs() <= 0.1);
}

#[test]
fn later_stages_name_the_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = RunDir::new(tmp.path());
    let cfg = RunConfig::default();
    let err = stage_extract(&dir, &cfg).err().unwrap();
    assert!(err.is_input_error());
    assert!(err.to_string().contains("`gen`"), "{err}");
    let err = stage_mesh(&dir, &cfg, 0).err().unwrap();
    assert!(err.is_input_error());
    let err = stage_eval(&dir, &cfg, 0).unwrap_err();
    assert!(err.is_input_error());
}

#[test]
fn eval_after_gen_reports_only_gen_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = RunDir::new(tmp.path());
    let cfg = parse_config("scene_extent_m = 120\nbuildings = 3\nframe_stride = 0\n").unwrap();
    stage_gen(&dir, &cfg, 5).unwrap();
    let report = stage_eval(&dir, &cfg, 5).unwrap();
    assert_eq!(report.get("dsm_rmse_truth_self"), Some(0.0));
    assert!(report.metrics.iter().all(|m| m.stage == "gen"));
    assert!(!dir.frames_dir().exists() || std::fs::read_dir(dir.frames_dir()).unwrap().next().is_none());
}
