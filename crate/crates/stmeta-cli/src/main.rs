//! Command-line front end: binds JSON configs to the ingest, synthesis,
//! training, evaluation and benchmark pipeline stages.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 when the config is
//! invalid. All outputs land in a config-digest-named directory so
//! identical configs are idempotent.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use config::{load_config, IngestConfig, LocationsConfig, SuiteConfig, TrainJobConfig};
use stmeta_core::bench::{run_benchmark, synth_generate, MethodSpec, SynthSpec};
use stmeta_core::ingest::{
    build_od_matrix, events_to_tensor, read_events, Locations, Station, StationRegistry,
};
use stmeta_core::models::{load_checkpoint, save_checkpoint, StMetaModel};
use stmeta_core::timeseries::{assemble_samples, split, Normalizer};
use stmeta_core::train::train_loop;

#[derive(Parser)]
#[command(name = "stmeta", about = "Spatio-temporal traffic prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides the config's `output_dir` and $STMETA_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; wins over the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw event CSVs into a traffic tensor (and optionally an
    /// origin-destination matrix).
    Ingest(CommonArgs),
    /// Generate a synthetic dataset with a planted relation graph.
    Synth(CommonArgs),
    /// Train one model on one dataset; writes a checkpoint and a log.
    Train(CommonArgs),
    /// Evaluate a checkpoint on a dataset's test split.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path; overrides the config's `checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a full benchmark suite and emit report.json / report.csv.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Parallel run workers; overrides the config file.
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Config/validation problems exit 2, run failures exit 1.
enum CliError {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate { common, checkpoint } => cmd_evaluate(&common, checkpoint.as_deref()),
        Command::Benchmark { common, workers } => cmd_benchmark(&common, workers),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("run error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output root precedence: --out flag, config `output_dir`, $STMETA_OUT,
/// then ./stmeta-out. The run directory inside it is named by the first
/// 16 hex chars of the effective config digest.
fn run_dir(flag_out: Option<&Path>, config_out: Option<&str>, digest: &str) -> PathBuf {
    let root = flag_out
        .map(Path::to_path_buf)
        .or_else(|| config_out.map(PathBuf::from))
        .or_else(|| std::env::var_os("STMETA_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("stmeta-out"));
    root.join(&digest[..16])
}

fn write_effective_config<T: serde::Serialize>(dir: &Path, config: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(config)?;
    std::fs::write(dir.join("effective_config.json"), json)?;
    Ok(())
}

fn config_digest<T: serde::Serialize>(config: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_string(config)?))
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

// ── ingest ──────────────────────────────────────────────────────────────

fn cmd_ingest(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: IngestConfig = load_config(&args.config).map_err(CliError::Config)?;
    let base = base_dir(&args.config);
    let events_path = base.join(&cfg.events_csv);
    if !events_path.is_file() {
        return Err(CliError::Config(anyhow!(
            "events file {} not found",
            events_path.display()
        )));
    }
    let locations = match &cfg.locations {
        LocationsConfig::Registry(path) => {
            let path = base.join(path);
            if !path.is_file() {
                return Err(CliError::Config(anyhow!(
                    "registry file {} not found",
                    path.display()
                )));
            }
            Locations::Stations(
                StationRegistry::load_csv(&path).map_err(|e| CliError::Config(e.into()))?,
            )
        }
        LocationsConfig::Grid(grid) => Locations::Grid(grid.clone()),
    };

    let digest = config_digest(&cfg).map_err(CliError::Config)?;
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), &digest);

    let run = || -> Result<(usize, usize, PathBuf)> {
        let batch = read_events(&events_path, &cfg.schema)?;
        let binned =
            events_to_tensor(&batch.events, &locations, cfg.slot_minutes, cfg.count_field)?;
        std::fs::create_dir_all(&dir)?;
        write_effective_config(&dir, &cfg)?;
        let tensor_path = dir.join("tensor.csv");
        binned.tensor.save_csv(&tensor_path)?;
        registry_echo(&locations).save_csv(&dir.join("registry.csv"))?;
        if cfg.emit_od {
            let od = build_od_matrix(&batch.events, &locations);
            let mut text = String::new();
            let n = od.rows();
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| od.at(i, j).to_string()).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(dir.join("od.csv"), text)?;
        }
        Ok((batch.skipped, binned.dropped, tensor_path))
    };
    let (skipped, dropped, tensor_path) = run().map_err(CliError::Run)?;
    println!(
        "ingest complete: tensor at {} ({skipped} rows skipped, {dropped} events outside locations)",
        tensor_path.display()
    );
    Ok(())
}

/// The registry describing the ingest locations: echoes station input or
/// derives cell centers for a grid.
fn registry_echo(locations: &Locations) -> StationRegistry {
    match locations {
        Locations::Stations(r) => r.clone(),
        Locations::Grid(g) => {
            let km_per_deg_lat = std::f64::consts::PI * 6371.0 / 180.0;
            let dlat = g.cell_km / km_per_deg_lat;
            let dlon = g.cell_km / (km_per_deg_lat * g.origin_lat.to_radians().cos());
            let stations = (0..g.rows)
                .flat_map(|r| {
                    (0..g.cols).map(move |c| Station {
                        id: format!("g{r}_{c}"),
                        lat: g.origin_lat + (r as f64 + 0.5) * dlat,
                        lon: g.origin_lon + (c as f64 + 0.5) * dlon,
                        lines: Vec::new(),
                    })
                })
                .collect();
            StationRegistry::new(stations).expect("generated ids are unique")
        }
    }
}

// ── synth ───────────────────────────────────────────────────────────────

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct SynthJobConfig {
    #[serde(flatten)]
    spec: SynthSpec,
    #[serde(default)]
    output_dir: Option<String>,
}

fn cmd_synth(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: SynthJobConfig = load_config(&args.config).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        cfg.spec.seed = seed;
    }
    let digest = config_digest(&cfg).map_err(CliError::Config)?;
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), &digest);
    let run = || -> Result<PathBuf> {
        let (tensor, graph) = synth_generate(&cfg.spec);
        std::fs::create_dir_all(&dir)?;
        write_effective_config(&dir, &cfg)?;
        let tensor_path = dir.join("dataset.csv");
        tensor.save_csv(&tensor_path)?;
        graph.save_text(&dir.join("planted_graph.txt"))?;
        Ok(tensor_path)
    };
    let tensor_path = run().map_err(CliError::Run)?;
    println!(
        "synth complete: {} slots x {} nodes at {}",
        cfg.spec.slots,
        cfg.spec.nodes,
        tensor_path.display()
    );
    Ok(())
}

// ── train ───────────────────────────────────────────────────────────────

fn cmd_train(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: TrainJobConfig = load_config(&args.config).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    let seed = cfg.seed.unwrap_or(0);
    cfg.early_stop
        .validate()
        .map_err(|e| CliError::Config(e.into()))?;
    let method = cfg.method.resolve(&cfg.factors).map_err(CliError::Config)?;
    let MethodSpec::Model { config: model_cfg, graph_names } = method.spec else {
        return Err(CliError::Config(anyhow!(
            "train needs a model method, got {}",
            cfg.method.name
        )));
    };
    let base = base_dir(&args.config);
    let dataset = cfg.dataset.resolve(&base).map_err(CliError::Config)?;
    let digest = config_digest(&cfg).map_err(CliError::Config)?;
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), &digest);

    let run = || -> Result<(f64, usize, PathBuf)> {
        let splits = split(&dataset.tensor)?;
        let normalizer = Normalizer::fit(&dataset.tensor, &splits.train, cfg.normalizer);
        let normalized = normalizer.apply(&dataset.tensor);
        let samples = assemble_samples(&normalized, &cfg.factors)?;
        let train = samples.filter_by_target_slot(&splits.train);
        let val = samples.filter_by_target_slot(&splits.val);

        let mut graphs = Vec::new();
        for name in &graph_names {
            let g = dataset
                .graphs
                .get(name)
                .ok_or_else(|| anyhow!("dataset {} has no graph {name:?}", dataset.id))?;
            graphs.push(g.clone());
        }
        let mut model = StMetaModel::new(model_cfg, &graphs, seed)?;
        let history = train_loop(&mut model, &train, &val, &cfg.training, &cfg.early_stop, seed)?;

        std::fs::create_dir_all(&dir)?;
        write_effective_config(&dir, &cfg)?;
        let ckpt = dir.join("checkpoint.json");
        save_checkpoint(&model, &ckpt)?;
        history.save_csv(&dir.join("training_log.csv"))?;
        Ok((history.best_val_loss, history.stop_epoch, ckpt))
    };
    let (best_val, stop_epoch, ckpt) = run().map_err(CliError::Run)?;
    println!(
        "train complete: best validation MSE {best_val:.6} after {stop_epoch} epochs, checkpoint at {}",
        ckpt.display()
    );
    Ok(())
}

// ── evaluate ────────────────────────────────────────────────────────────

fn cmd_evaluate(args: &CommonArgs, checkpoint_flag: Option<&Path>) -> Result<(), CliError> {
    let cfg: TrainJobConfig = load_config(&args.config).map_err(CliError::Config)?;
    let base = base_dir(&args.config);
    let checkpoint_path = checkpoint_flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.checkpoint.as_ref().map(|p| base.join(p)))
        .ok_or_else(|| {
            CliError::Config(anyhow!("evaluate needs --checkpoint or a `checkpoint` field"))
        })?;
    if !checkpoint_path.is_file() {
        return Err(CliError::Config(anyhow!(
            "checkpoint {} not found",
            checkpoint_path.display()
        )));
    }
    let method = cfg.method.resolve(&cfg.factors).map_err(CliError::Config)?;
    let MethodSpec::Model { graph_names, .. } = method.spec else {
        return Err(CliError::Config(anyhow!("evaluate needs a model method")));
    };
    let dataset = cfg.dataset.resolve(&base).map_err(CliError::Config)?;
    let digest = config_digest(&cfg).map_err(CliError::Config)?;
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), &digest);

    let run = || -> Result<f64> {
        let checkpoint = load_checkpoint(&checkpoint_path)?;
        let mut graphs = Vec::new();
        for name in &graph_names {
            let g = dataset
                .graphs
                .get(name)
                .ok_or_else(|| anyhow!("dataset {} has no graph {name:?}", dataset.id))?;
            graphs.push(g.clone());
        }
        let mut model = StMetaModel::new(checkpoint.config.clone(), &graphs, 0)?;
        checkpoint.restore_into(&mut model)?;

        let splits = split(&dataset.tensor)?;
        let normalizer = Normalizer::fit(&dataset.tensor, &splits.train, cfg.normalizer);
        let normalized = normalizer.apply(&dataset.tensor);
        let factors = checkpoint.config.factors;
        let raw_test =
            assemble_samples(&dataset.tensor, &factors)?.filter_by_target_slot(&splits.test);
        let norm_test =
            assemble_samples(&normalized, &factors)?.filter_by_target_slot(&splits.test);

        let mut pred = model
            .predict_all(&norm_test, cfg.training.batch_size)?
            .into_values();
        normalizer.invert_matrix(&mut pred, raw_test.locations);
        let score = stmeta_core::bench::rmse(&pred, &raw_test.target)?;

        std::fs::create_dir_all(&dir)?;
        write_effective_config(&dir, &cfg)?;
        let summary = serde_json::json!({
            "dataset": dataset.id,
            "checkpoint": checkpoint_path.display().to_string(),
            "test_rmse": score,
            "test_samples": raw_test.len(),
        });
        std::fs::write(
            dir.join("evaluation.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
        Ok(score)
    };
    let score = run().map_err(CliError::Run)?;
    println!("evaluate complete: test RMSE {score:.6} (original units)");
    Ok(())
}

// ── benchmark ───────────────────────────────────────────────────────────

fn cmd_benchmark(args: &CommonArgs, workers_flag: Option<usize>) -> Result<(), CliError> {
    let mut cfg: SuiteConfig = load_config(&args.config).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(workers) = workers_flag {
        cfg.workers = workers;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.display().to_string());
    }
    if cfg.seed.is_none() {
        return Err(CliError::Config(anyhow!(
            "benchmark requires a seed (config `seed` or --seed)"
        )));
    }
    let digest = config_digest(&cfg).map_err(CliError::Config)?;
    let base = base_dir(&args.config);
    let suite = cfg.resolve(&base, &digest).map_err(CliError::Config)?;
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), &digest);

    let report = run_benchmark(&suite).map_err(|e| CliError::Run(e.into()))?;
    let write = || -> Result<()> {
        std::fs::create_dir_all(&dir)?;
        write_effective_config(&dir, &cfg)?;
        report
            .save_json(&dir.join("report.json"))
            .context("writing report.json")?;
        report
            .save_csv(&dir.join("report.csv"))
            .context("writing report.csv")?;
        Ok(())
    };
    write().map_err(CliError::Run)?;

    println!(
        "benchmark report ({} methods x {} datasets)",
        report.methods.len(),
        report.datasets.len()
    );
    print!("{:<18}", "method");
    for d in &report.datasets {
        print!(" {d:>14}");
    }
    println!(" {:>10} {:>10}", "AvgNRMSE", "WstNRMSE");
    for (m, method) in report.methods.iter().enumerate() {
        print!("{method:<18}");
        for d in 0..report.datasets.len() {
            match report.rmse_matrix[m][d] {
                Some(v) => print!(" {v:>14.4}"),
                None => print!(" {:>14}", "error"),
            }
        }
        match (report.avg_nrmse[m], report.wst_nrmse[m]) {
            (Some(a), Some(w)) => println!(" {a:>10.4} {w:>10.4}"),
            _ => println!(" {:>10} {:>10}", "error", "error"),
        }
    }
    println!("artifacts in {}", dir.display());

    if report.has_failures() {
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
        return Err(CliError::Run(anyhow!(
            "{} run(s) failed",
            report.failures.len()
        )));
    }
    Ok(())
}
