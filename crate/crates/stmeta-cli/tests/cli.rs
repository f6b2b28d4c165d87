//! CLI behavior: exit codes, output placement, flag/config precedence.

use std::path::Path;
use std::process::Command;

fn stmeta() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stmeta"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const SMALL_SUITE: &str = r#"{
  "seed": 3,
  "datasets": [
    {"id": "s", "synth": {"nodes": 3, "slots": 400, "slot_minutes": 60,
     "daily_amplitude": 2.0, "noise_sigma": 0.3, "seed": 4}}
  ],
  "methods": [{"name": "HM(TC)"}, {"name": "HM(TM)"}],
  "factors": {"closeness_lags": 3, "daily_lags": 1, "weekly_lags": 1}
}"#;

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    write(&cfg, &SMALL_SUITE.replace("\"workers\"", "\"wrokers\""));
    // inject an actually unknown key
    let broken = SMALL_SUITE.replace("\"seed\": 3,", "\"seed\": 3, \"typo_key\": 1,");
    write(&cfg, &broken);
    let out = dir.path().join("out");
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists(), "no partial outputs on config error");
}

#[test]
fn missing_dataset_file_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    write(
        &cfg,
        r#"{
  "seed": 3,
  "datasets": [{"id": "missing", "tensor_csv": "does_not_exist.csv"}],
  "methods": [{"name": "HM(TC)"}]
}"#,
    );
    let out = dir.path().join("out");
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn benchmark_without_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    write(&cfg, &SMALL_SUITE.replace("\"seed\": 3,", ""));
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    write(&cfg, SMALL_SUITE);
    let out = dir.path().join("out");
    for seed_flag in ["3", "99"] {
        let status = stmeta()
            .args(["benchmark", "--config"])
            .arg(&cfg)
            .args(["--seed", seed_flag])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    // different effective seeds give different digest directories
    let dirs: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(dirs.len(), 2, "one run dir per effective config");
    // and the effective config echoes the merged seed
    let mut seeds = Vec::new();
    for d in std::fs::read_dir(&out).unwrap() {
        let text =
            std::fs::read_to_string(d.unwrap().path().join("effective_config.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        seeds.push(v["seed"].as_u64().unwrap());
    }
    seeds.sort();
    assert_eq!(seeds, vec![3, 99]);
}

#[test]
fn env_var_sets_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    write(&cfg, SMALL_SUITE);
    let root = dir.path().join("env_root");
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .env("STMETA_OUT", &root)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(root.is_dir(), "STMETA_OUT must place outputs");
}

#[test]
fn synth_then_benchmark_on_emitted_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let synth_cfg = dir.path().join("synth.json");
    write(
        &synth_cfg,
        r#"{"nodes": 3, "slots": 500, "slot_minutes": 60,
            "daily_amplitude": 2.5, "noise_sigma": 0.4, "seed": 21}"#,
    );
    let synth_out = dir.path().join("synth_out");
    let status = stmeta()
        .args(["synth", "--config"])
        .arg(&synth_cfg)
        .arg("--out")
        .arg(&synth_out)
        .status()
        .unwrap();
    assert!(status.success());
    let mut dataset_csv = None;
    let mut graph_txt = None;
    for d in std::fs::read_dir(&synth_out).unwrap() {
        let run = d.unwrap().path();
        if run.join("dataset.csv").is_file() {
            dataset_csv = Some(run.join("dataset.csv"));
            graph_txt = Some(run.join("planted_graph.txt"));
        }
    }
    let dataset_csv = dataset_csv.expect("synth emitted dataset.csv");
    let graph_txt = graph_txt.expect("synth emitted planted_graph.txt");
    assert!(graph_txt.is_file());

    // the emitted tensor and planted graph feed a fresh suite: baselines
    // plus a small spatial model re-using the saved graph file
    let suite = format!(
        r#"{{
  "seed": 5,
  "datasets": [{{"id": "emitted", "tensor_csv": {tensor:?},
                 "graphs": {{"functionality": {{"corr_threshold": 0.1}}}},
                 "graph_files": {{"planted": {graph:?}}}}}],
  "methods": [
    {{"name": "HM(TC)"}}, {{"name": "HM(TM)"}}, {{"name": "AR"}},
    {{"name": "STMeta-DCG-GAL", "graphs": ["planted"], "hidden_units": 8, "head_units": 8}}
  ],
  "factors": {{"closeness_lags": 4, "daily_lags": 1, "weekly_lags": 1}},
  "training": {{"learning_rate": 0.002, "batch_size": 32, "max_epochs": 20, "grad_clip_norm": 5.0}},
  "early_stop": {{"patience": 6, "p_threshold": 0.1}}
}}"#,
        tensor = dataset_csv.display().to_string(),
        graph = graph_txt.display().to_string(),
    );
    let suite_cfg = dir.path().join("suite.json");
    write(&suite_cfg, &suite);
    let bench_out = dir.path().join("bench_out");
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&suite_cfg)
        .arg("--out")
        .arg(&bench_out)
        .status()
        .unwrap();
    assert!(status.success(), "end-to-end synth -> benchmark");
    let mut found_report = false;
    for d in std::fs::read_dir(&bench_out).unwrap() {
        if d.unwrap().path().join("report.csv").is_file() {
            found_report = true;
        }
    }
    assert!(found_report);
}

#[test]
fn failed_run_exits_1_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    // HM(TM) needs daily and weekly lags; with a closeness-only factor
    // spec that cell fails while HM(TC) succeeds
    write(
        &cfg,
        r#"{
  "seed": 3,
  "datasets": [
    {"id": "s", "synth": {"nodes": 3, "slots": 400, "slot_minutes": 60,
     "daily_amplitude": 2.0, "noise_sigma": 0.3, "seed": 4}}
  ],
  "methods": [{"name": "HM(TC)"}, {"name": "HM(TM)"}],
  "factors": {"closeness_lags": 3, "daily_lags": 0, "weekly_lags": 0}
}"#,
    );
    let out = dir.path().join("out");
    let status = stmeta()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1), "failed run must exit 1");
    let mut report = None;
    for d in std::fs::read_dir(&out).unwrap() {
        let candidate = d.unwrap().path().join("report.csv");
        if candidate.is_file() {
            report = Some(candidate);
        }
    }
    let text = std::fs::read_to_string(report.expect("report still written")).unwrap();
    assert!(text.contains("error"), "failed cell marked in the csv");
}
