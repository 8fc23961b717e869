//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use twincal_core::calibration::{train, CalibModel, LabelMode, ModelConfig, TrainConfig};
use twincal_core::nn::Adam;
use twincal_core::{load_scene, Scene};

use crate::bench::{bench, mean_row, write_timing};
use crate::dataset::{grid_dataset, offgrid_dataset};
use crate::error::{Error, Result};
use crate::experiment::{csv_err, evaluate, EvalConfig};
use crate::formats::{read_checkpoint, read_dataset, write_checkpoint, write_dataset};
use crate::heatmap::{heatmap, los_split, write_heatmap};
use crate::presets::Preset;

#[derive(Debug, Parser)]
#[command(name = "twincal", version, about = "Digital-twin calibration of DFT-domain CSI")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in scene as a config file.
    SceneGen {
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trace both twins and write a TWC1 dataset.
    Dataset(DatasetArgs),
    /// Train the calibration network.
    Train(TrainArgs),
    /// Run the five feedback benchmarks on an evaluation set.
    Eval(EvalArgs),
    /// Per-position beam discrepancy between the twins.
    Heatmap {
        #[arg(long)]
        data: PathBuf,
        /// Retrace each user to add LoS and path-equality columns.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time both tracers and model inference.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        /// Untrained weights are used when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "timing.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Both,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub profile: ProfileArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Sample this many off-grid users instead of the grid.
    #[arg(long)]
    pub offgrid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Store only the DFT weights.
    #[arg(long)]
    pub no_channels: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Sparse,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Kept beams for sparse labels.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 15)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Training grid dataset, used by the grid-search benchmark.
    #[arg(long, visible_alias = "train")]
    pub data: PathBuf,
    /// Off-grid evaluation dataset with channels.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr: f64,
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-user ρ for every benchmark.
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
    /// Defaults to `<out>_summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Defaults to `<out>_cdf.csv`.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scene(&text).map_err(|source| Error::Scene {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn load_model(path: &Path, seed: u64) -> Result<CalibModel> {
    let store = read_checkpoint(path)?;
    CalibModel::from_store(&store, seed).map_err(|e| Error::schema(path, format!("not a calibration model: {e}")))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SceneGen { preset, out } => {
            std::fs::write(&out, preset.config_text()).map_err(|e| Error::io(&out, e))?;
            log::info!("wrote {} scene to {}", preset, out.display());
        }
        Command::Dataset(a) => {
            let scene = read_scene(&a.scene)?;
            let keep = !a.no_channels;
            let (data, stats) = match a.offgrid {
                Some(k) => offgrid_dataset(&scene, k, a.seed, keep)?,
                None => grid_dataset(&scene, keep),
            };
            log::info!(
                "{} users kept of {} candidates ({} inside buildings, {} unreachable)",
                stats.kept,
                stats.candidates,
                stats.inside_buildings,
                stats.zero_target
            );
            write_dataset(&a.out, &data)?;
        }
        Command::Train(a) => {
            let data = read_dataset(&a.data)?;
            let mode = match a.mode {
                ModeArg::Full => LabelMode::FullTwin,
                ModeArg::Sparse => LabelMode::SparseTopP(a.p),
            };
            if a.batch_size == 0 {
                return Err(Error::Usage("--batch-size must be positive".into()));
            }
            if !(a.lr > 0.0) {
                return Err(Error::Usage("--lr must be positive".into()));
            }
            let cfg = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch_size,
                patience: a.patience,
                adam: Adam {
                    lr: a.lr,
                    ..Adam::default()
                },
                seed: a.seed,
                ..TrainConfig::default()
            };
            let outcome = train(&data.records, mode, ModelConfig::new(data.n, a.seed), &cfg)?;
            log::info!(
                "best epoch {} with validation loss {} (untrained {})",
                outcome.best_epoch,
                outcome.best_val_loss(),
                outcome.initial_val_loss()
            );
            write_checkpoint(&a.out, outcome.model.store())?;
            if let Some(path) = a.log {
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(["epoch", "train_loss", "val_loss"]).map_err(csv_err)?;
                for e in &outcome.log {
                    w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()])
                        .map_err(csv_err)?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::Eval(a) => {
            let train_set = read_dataset(&a.data)?;
            let eval_set = read_dataset(&a.eval)?;
            let mut model = load_model(&a.model, a.seed)?;
            if model.n() != eval_set.n {
                return Err(Error::NMismatch {
                    what: format!("model {}", a.model.display()),
                    expected: eval_set.n,
                    got: model.n(),
                });
            }
            if train_set.n != eval_set.n {
                return Err(Error::NMismatch {
                    what: format!("dataset {}", a.data.display()),
                    expected: eval_set.n,
                    got: train_set.n,
                });
            }
            let cfg = EvalConfig {
                p: a.p,
                snr_db: a.snr,
                seed: a.seed,
            };
            let table = evaluate(&train_set, &eval_set, &mut model, cfg)?;
            let summary = a.summary.unwrap_or_else(|| sibling(&a.out, "summary"));
            let cdf = a.cdf.unwrap_or_else(|| sibling(&a.out, "cdf"));
            table.save(&a.out, &summary, &cdf)?;
            for b in crate::experiment::Benchmark::ALL {
                let s = table.summary(b);
                log::info!("{b}: median {:.4}, mean {:.4}, p10 {:.4}", s.median, s.mean, s.p10);
            }
        }
        Command::Heatmap { data, scene, out } => {
            let d = read_dataset(&data)?;
            let scene = scene.as_deref().map(read_scene).transpose()?;
            let rows = heatmap(&d, scene.as_ref())?;
            if scene.is_some() {
                let (los, nlos) = los_split(&rows);
                log::info!("mean set discrepancy: LoS {los:?}, NLoS {nlos:?}");
            }
            write_heatmap(&rows, create(&out)?)?;
        }
        Command::Bench {
            scene,
            repeat,
            model,
            out,
            seed,
        } => {
            let s = read_scene(&scene)?;
            let mut m = match model {
                Some(p) => load_model(&p, seed)?,
                None => CalibModel::new(ModelConfig::new(s.antennas, seed))?,
            };
            let rows = bench(&s, &mut m, repeat)?;
            write_timing(&rows, create(&out)?)?;
            let mean = mean_row(&rows);
            log::info!(
                "per user: target trace {:.3e} s, baseline trace {:.3e} s, inference {:.3e} s",
                mean.target_trace_s,
                mean.baseline_trace_s,
                mean.inference_s
            );
        }
    }
    Ok(())
}

/// Caps the rayon pool with `TWINCAL_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("TWINCAL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Usage(format!("TWINCAL_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Other(e.to_string()))
}
