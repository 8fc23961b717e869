//! Paired feedback evaluation of the five beam-selection benchmarks.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use twincal_core::calibration::{train, CalibModel, DftReport, LabelMode, ModelConfig, TrainConfig, TrainOutcome};
use twincal_core::feedback::{evaluate_direct, evaluate_selection, user_seed, FeedbackError};
use twincal_core::metrics::{cdf, summarize, Summary};
use twincal_core::{DftCodebook, Scene, Vec3};

use crate::dataset::{grid_dataset, offgrid_dataset};
use crate::error::{Error, Result};
use crate::formats::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    Target,
    Baseline,
    Calibrated,
    GridSearch,
    DirectBaselineChannel,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::Target,
        Benchmark::Baseline,
        Benchmark::Calibrated,
        Benchmark::GridSearch,
        Benchmark::DirectBaselineChannel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Target => "target",
            Benchmark::Baseline => "baseline",
            Benchmark::Calibrated => "calibrated",
            Benchmark::GridSearch => "grid_search",
            Benchmark::DirectBaselineChannel => "direct_baseline_channel",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-user ρ for every benchmark over one shared set of users.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub positions: Vec<Vec3>,
    /// Indexed like [`Benchmark::ALL`]; every column has one entry per user.
    pub rho: [Vec<f64>; 5],
}

impl MetricTable {
    pub fn column(&self, b: Benchmark) -> &[f64] {
        &self.rho[b as usize]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn summary(&self, b: Benchmark) -> Summary {
        summarize(self.column(b)).expect("metric table is never empty")
    }

    pub fn write_per_user(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["user".to_string(), "x".into(), "y".into(), "z".into()];
        header.extend(Benchmark::ALL.iter().map(|b| b.name().to_string()));
        out.write_record(&header).map_err(csv_err)?;
        for (i, p) in self.positions.iter().enumerate() {
            let mut row = vec![i.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()];
            row.extend(self.rho.iter().map(|c| c[i].to_string()));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Other(e.to_string()))
    }

    pub fn write_summary(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "mean", "median", "p10"]).map_err(csv_err)?;
        for b in Benchmark::ALL {
            let s = self.summary(b);
            out.write_record([b.name().to_string(), s.mean.to_string(), s.median.to_string(), s.p10.to_string()])
                .map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Other(e.to_string()))
    }

    /// Long format: one row per benchmark and abscissa.
    pub fn write_cdf(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "rho", "cdf"]).map_err(csv_err)?;
        for b in Benchmark::ALL {
            for (x, f) in cdf(self.column(b)).expect("metric table is never empty") {
                out.write_record([b.name().to_string(), x.to_string(), f.to_string()]).map_err(csv_err)?;
            }
        }
        out.flush().map_err(|e| Error::Other(e.to_string()))
    }

    pub fn save(&self, metrics: &Path, summary: &Path, cdf: &Path) -> Result<()> {
        let open = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| Error::io(p, e));
        self.write_per_user(open(metrics)?)?;
        self.write_summary(open(summary)?)?;
        self.write_cdf(open(cdf)?)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Other(format!("write failed: {e}")),
        other => Error::Other(format!("{other:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub p: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            p: 4,
            snr_db: 20.0,
            seed: 0,
        }
    }
}

/// Index of the nearest training position; ties go to the lexicographically
/// smallest position.
pub fn nearest_neighbor(grid: &[Vec3], p: Vec3) -> Option<usize> {
    let key = |q: &Vec3| (q.x, q.y, q.z);
    let mut best: Option<(f64, usize)> = None;
    for (i, q) in grid.iter().enumerate() {
        let v = *q - p;
        let d = v.x * v.x + v.y * v.y + v.z * v.z;
        best = match best {
            None => Some((d, i)),
            Some((bd, bi)) => {
                let closer = d < bd || (d == bd && key(q).partial_cmp(&key(&grid[bi])) == Some(std::cmp::Ordering::Less));
                if closer {
                    Some((d, i))
                } else {
                    Some((bd, bi))
                }
            }
        };
    }
    best.map(|(_, i)| i)
}

fn rho_or_zero(r: std::result::Result<f64, FeedbackError>) -> std::result::Result<f64, FeedbackError> {
    match r {
        Err(FeedbackError::Unreconstructable) => Ok(0.0),
        other => other,
    }
}

/// Scores every benchmark on the users of `eval`. All benchmarks see the
/// same noise draws for a given user.
pub fn evaluate(train_set: &Dataset, eval_set: &Dataset, model: &mut CalibModel, cfg: EvalConfig) -> Result<MetricTable> {
    let n = eval_set.n;
    for (what, got) in [("training dataset", train_set.n), ("model", model.n())] {
        if got != n {
            return Err(Error::NMismatch {
                what: what.into(),
                expected: n,
                got,
            });
        }
    }
    if !eval_set.has_channels() {
        return Err(Error::Usage("evaluation dataset must carry channels (omit --no-channels)".into()));
    }
    if eval_set.is_empty() || train_set.is_empty() {
        return Err(Error::Usage("evaluation needs nonempty training and evaluation datasets".into()));
    }
    if cfg.p == 0 || cfg.p > n {
        return Err(Error::Usage(format!("P = {} must lie in 1..={n}", cfg.p)));
    }
    let positions: Vec<Vec3> = eval_set.records.iter().map(|r| r.position).collect();
    let zb: Vec<&[f64]> = eval_set.records.iter().map(|r| r.z_baseline.as_slice()).collect();
    let calibrated = model.predict(&positions, &zb)?;
    let grid: Vec<Vec3> = train_set.records.iter().map(|r| r.position).collect();
    let codebook = DftCodebook::new(n);

    let rows: Vec<[f64; 5]> = eval_set
        .records
        .par_iter()
        .zip(calibrated.par_iter())
        .enumerate()
        .map(|(i, (r, cal))| score_user(i, r, cal, train_set, &grid, &codebook, cfg))
        .collect::<Result<_>>()?;

    let mut rho: [Vec<f64>; 5] = Default::default();
    for row in &rows {
        for (c, v) in rho.iter_mut().zip(row) {
            c.push(*v);
        }
    }
    Ok(MetricTable { positions, rho })
}

fn score_user(
    i: usize,
    r: &DftReport,
    calibrated: &[f64],
    train_set: &Dataset,
    grid: &[Vec3],
    codebook: &DftCodebook,
    cfg: EvalConfig,
) -> Result<[f64; 5]> {
    let h = r.h_target.as_ref().expect("checked has_channels");
    let hb = r.h_baseline.as_ref().expect("checked has_channels");
    let seed = user_seed(cfg.seed, i);
    let fb = |scores: &[f64]| {
        rho_or_zero(evaluate_selection(h, scores, cfg.p, cfg.snr_db, seed, codebook).map(|f| f.rho))
    };
    let nn = nearest_neighbor(grid, r.position).expect("training set is nonempty");
    let out = [
        fb(&r.z_target),
        fb(&r.z_baseline),
        fb(calibrated),
        fb(&train_set.records[nn].z_target),
        evaluate_direct(h, hb),
    ];
    let mut row = [0.0; 5];
    for (slot, v) in row.iter_mut().zip(out) {
        *slot = v.map_err(|e| Error::Other(format!("evaluation user {i}: {e}")))?;
    }
    Ok(row)
}

/// Everything needed to go from a scene to a metric table in one process.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene: Scene,
    pub eval_count: usize,
    pub label_mode: LabelMode,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Seeds off-grid sampling and model initialization.
    pub seed: u64,
}

impl ExperimentConfig {
    /// The desk-scale default: `blocks`, 300 off-grid users, N = 32, P = 4,
    /// 20 dB, sparse top-4 labels.
    pub fn desk_default() -> Self {
        Self {
            scene: crate::presets::Preset::Blocks.scene(),
            eval_count: 300,
            label_mode: LabelMode::SparseTopP(4),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

pub struct ExperimentOutput {
    pub train_set: Dataset,
    pub eval_set: Dataset,
    pub outcome: TrainOutcome,
    pub table: MetricTable,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.scene
        .validate()
        .map_err(|e| Error::Other(format!("invalid scene: {e}")))?;
    let (train_set, gs) = grid_dataset(&cfg.scene, false);
    log::info!("grid dataset: {} users ({} dropped)", gs.kept, gs.zero_target);
    let (eval_set, _) = offgrid_dataset(&cfg.scene, cfg.eval_count, cfg.seed, true)?;
    let outcome = train(
        &train_set.records,
        cfg.label_mode,
        ModelConfig::new(cfg.scene.antennas, cfg.seed),
        &cfg.train,
    )?;
    let mut model = outcome.model.clone();
    let table = evaluate(&train_set, &eval_set, &mut model, cfg.eval)?;
    Ok(ExperimentOutput {
        train_set,
        eval_set,
        outcome,
        table,
    })
}

impl FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown benchmark {s:?}"))
    }
}
