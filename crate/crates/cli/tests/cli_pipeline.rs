mod common;

use std::fs;

use channelforge::sigproc::{ingest_csv, synth_cycles, write_csv, SynthSpec};
use channelforge_cli::store::{Manifest, Stage};
use common::{block_keypoints, block_stl, channelforge, stderr, BLOCK};

fn manifest(dir: &std::path::Path) -> Manifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn route_without_grid_names_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let kp = tmp.path().join("kp.json");
    fs::write(&kp, block_keypoints().to_string()).unwrap();
    let out = channelforge(
        &["route", "--keypoints", kp.to_str().unwrap()],
        &tmp.path().join("proj"),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("missing grid artifact"), "{}", stderr(&out));

    let out = channelforge(&["carve"], &tmp.path().join("proj"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing path artifact"), "{}", stderr(&out));
}

#[test]
fn stage_by_stage_pipeline_and_invalidation() {
    let tmp = tempfile::tempdir().unwrap();
    let proj = tmp.path().join("proj");
    let stl = tmp.path().join("block.stl");
    fs::write(&stl, block_stl(BLOCK)).unwrap();
    let kp = tmp.path().join("kp.json");
    fs::write(&kp, block_keypoints().to_string()).unwrap();

    let run = |args: &[&str]| {
        let o = channelforge(args, &proj);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    run(&["voxelize", "--mesh", stl.to_str().unwrap(), "--voxel-size-mm", "1"]);
    assert_eq!(manifest(&proj).revision, 2);
    run(&["route", "--keypoints", kp.to_str().unwrap()]);
    run(&["carve"]);
    let check = channelforge(&["check", "--strict"], &proj);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(proj.join("report.json")).unwrap()).unwrap();
    let expected = if report["overall"] == "pass" { 0 } else { 2 };
    assert_eq!(check.status.code(), Some(expected), "{}", stderr(&check));
    run(&["export", "--smoothing", "0"]);
    let m = manifest(&proj);
    assert_eq!(m.revision, 6);
    assert_eq!(m.stages.len(), 6);
    assert!(fs::read(proj.join("carved.stl")).unwrap().len() > 84);

    // A new route drops everything downstream of it.
    run(&["route", "--keypoints", kp.to_str().unwrap(), "--connectivity", "6"]);
    let m = manifest(&proj);
    assert_eq!(m.revision, 7);
    for stage in [Stage::Carved, Stage::Report, Stage::Export] {
        assert!(!m.stages.contains_key(&stage), "{stage:?} survived a re-route");
    }
    for f in ["carved.json", "report.json", "carved.stl"] {
        assert!(!proj.join(f).exists(), "{f} survived a re-route");
    }
    assert_eq!(m.stages[&Stage::Path].config["connectivity"], 6);
    let out = channelforge(&["export"], &proj);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flags_and_inputs_are_validation_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let proj = tmp.path().join("proj");
    let stl = tmp.path().join("block.stl");
    fs::write(&stl, block_stl(BLOCK)).unwrap();

    let out = channelforge(
        &["voxelize", "--mesh", stl.to_str().unwrap(), "--voxel-size-mm", "-1"],
        &proj,
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let mut open = block_stl(BLOCK);
    open.truncate(84 + 50 * 11);
    open[80..84].copy_from_slice(&11u32.to_le_bytes());
    fs::write(&stl, open).unwrap();
    let out = channelforge(&["voxelize", "--mesh", stl.to_str().unwrap()], &proj);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("watertight"), "{}", stderr(&out));

    let missing = tmp.path().join("nope.stl");
    let out = channelforge(&["voxelize", "--mesh", missing.to_str().unwrap()], &proj);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_round_trips_a_synthetic_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        cycles: 50,
        amplitude_ohm: 0.4,
        drift_ohm: 0.05,
        ..SynthSpec::default()
    };
    let mut csv = Vec::new();
    write_csv(&synth_cycles(&spec).unwrap(), &mut csv).unwrap();
    let input = tmp.path().join("trace.csv");
    fs::write(&input, csv).unwrap();
    let out_dir = tmp.path().join("analysis");
    // 300 s of data: the highpass stage needs ten cutoff periods.
    let args = [
        "analyze",
        "--in",
        input.to_str().unwrap(),
        "--method",
        "both",
        "--cutoff-hz",
        "0.05",
    ];
    let out = channelforge(&args, &out_dir);
    assert!(out.status.success(), "{}", stderr(&out));

    let stats: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cycles"], 50);
    let mean = stats["mean_peak_ohm"].as_f64().unwrap();
    assert!((mean - 0.4).abs() <= 0.004, "mean peak {mean}");
    let corrected = ingest_csv(&fs::read(out_dir.join("corrected.csv")).unwrap()).unwrap();
    assert_eq!(corrected.len(), 50 * 6000);
    let plot = fs::read_to_string(out_dir.join("cycle_plot.csv")).unwrap();
    assert!(plot.starts_with("t_s,mean_ohm,sd_ohm"));
    assert_eq!(plot.lines().count(), 6001);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let out = channelforge(
            &["simulate", "--episodes", "4", "--seed", seed, "--grasp-cycles", "2"],
            &dir,
        );
        assert!(out.status.success(), "{}", stderr(&out));
        dir
    };
    let (a, b, c) = (run("a", "9"), run("b", "9"), run("c", "10"));
    for f in ["batch.json", "episode_000.csv", "episode_003.csv", "grasp_trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(
        fs::read(a.join("batch.json")).unwrap(),
        fs::read(c.join("batch.json")).unwrap()
    );
    let batch: serde_json::Value = serde_json::from_slice(&fs::read(a.join("batch.json")).unwrap()).unwrap();
    assert_eq!(batch["episodes"], 4);
    assert_eq!(batch["target_reached"], 4);
    let ep = fs::read_to_string(a.join("episode_000.csv")).unwrap();
    assert!(ep.starts_with("t_s,closure_mm,ohms,action"));
    assert!(ep.trim_end().ends_with("stop"));
}

#[test]
fn data_dir_env_sets_default_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_channelforge"))
        .args(["simulate", "--episodes", "1"])
        .env("CHANNELFORGE_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(tmp.path().join("batch.json").is_file());
}
