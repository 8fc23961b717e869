//! Position-conditioned U-Net that maps low-fidelity DFT weights to refined
//! ones, plus label construction and training.

use alloc::vec::Vec;

use thiserror::Error;

use crate::channel::Channel;
use crate::math::Vec3;
use crate::nn::NnError;

mod model;
mod train;

pub use model::{CalibModel, ModelConfig, ShapeRow, EMBED_HIDDEN};
pub use train::{evaluate_loss, train, EpochLog, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("N = {0} is not a positive multiple of 8")]
    BadResolution(usize),
    #[error("sparse labels need P in 2..=4, got {0}")]
    BadSparsity(usize),
    #[error("target weights are all zero")]
    ZeroTarget,
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: &'static str },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One user's paired twin outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DftReport {
    pub position: Vec3,
    pub z_baseline: Vec<f64>,
    pub z_target: Vec<f64>,
    pub h_baseline: Option<Channel>,
    pub h_target: Option<Channel>,
}

impl DftReport {
    pub fn n(&self) -> usize {
        self.z_target.len()
    }

    pub fn validate(&self, n: usize) -> Result<(), &'static str> {
        if self.z_baseline.len() != n || self.z_target.len() != n {
            return Err("weight length differs from N");
        }
        if !self.position.is_finite() {
            return Err("non-finite position");
        }
        let ok = |z: &[f64]| z.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !ok(&self.z_baseline) || !ok(&self.z_target) {
            return Err("weights must be finite and nonnegative");
        }
        for h in [&self.h_baseline, &self.h_target].into_iter().flatten() {
            if h.len() != n {
                return Err("channel length differs from N");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Full target weights, L1-normalized.
    FullTwin,
    /// Only the top-`P` target weights survive, L1-normalized.
    SparseTopP(usize),
}

impl LabelMode {
    pub fn validate(self) -> Result<(), CalibError> {
        match self {
            LabelMode::SparseTopP(p) if !(2..=4).contains(&p) => Err(CalibError::BadSparsity(p)),
            _ => Ok(()),
        }
    }
}

pub fn build_labels(z_target: &[f64], mode: LabelMode) -> Result<Vec<f64>, CalibError> {
    mode.validate()?;
    let kept: Vec<f64> = match mode {
        LabelMode::FullTwin => z_target.to_vec(),
        LabelMode::SparseTopP(p) => {
            let mut out = alloc::vec![0.0; z_target.len()];
            let mut order: Vec<usize> = (0..z_target.len()).collect();
            order.sort_by(|&a, &b| z_target[b].total_cmp(&z_target[a]));
            for &i in order.iter().take(p) {
                out[i] = z_target[i];
            }
            out
        }
    };
    let total: f64 = kept.iter().sum();
    if total <= 0.0 {
        return Err(CalibError::ZeroTarget);
    }
    Ok(kept.iter().map(|v| v / total).collect())
}

/// Baseline weights as fed to the network: L1-normalized, zero stays zero.
pub fn normalize_input(z: &[f64]) -> Vec<f64> {
    let total: f64 = z.iter().sum();
    if total > 0.0 {
        z.iter().map(|v| v / total).collect()
    } else {
        z.to_vec()
    }
}

/// Axis-aligned box that maps positions onto `[-1, 1]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl PositionBox {
    pub fn from_positions<'a>(positions: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for p in positions {
            any = true;
            for axis in 0..3 {
                let v = p.component(axis);
                min = min.with_component(axis, min.component(axis).min(v));
                max = max.with_component(axis, max.component(axis).max(v));
            }
        }
        if !any {
            return Self {
                min: Vec3::ZERO,
                max: Vec3::ZERO,
            };
        }
        Self { min, max }
    }

    /// A degenerate axis (all positions equal) maps to 0.
    pub fn standardize(&self, p: Vec3) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (axis, o) in out.iter_mut().enumerate() {
            let lo = self.min.component(axis);
            let hi = self.max.component(axis);
            if hi > lo {
                *o = 2.0 * (p.component(axis) - lo) / (hi - lo) - 1.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests;
