use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_labels, CalibError, CalibModel, DftReport, LabelMode, ModelConfig, PositionBox};
use crate::nn::{adam_step, mse_loss, Adam, Mode, ParamStore, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub val_fraction: f64,
    pub adam: Adam,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            patience: 15,
            val_fraction: 0.1,
            adam: Adam::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// Epoch 0 is the untrained model.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: CalibModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainOutcome {
    pub fn initial_val_loss(&self) -> f64 {
        self.log[0].val_loss
    }

    pub fn best_val_loss(&self) -> f64 {
        self.log[self.best_epoch].val_loss
    }
}

struct Prepared {
    positions: Tensor3,
    inputs: Tensor3,
    labels: Tensor3,
}

fn gather(data: &Prepared, idx: &[usize], n: usize) -> (Tensor3, Tensor3, Tensor3) {
    let b = idx.len();
    let mut p = Vec::with_capacity(b * 3);
    let mut z = Vec::with_capacity(b * n);
    let mut t = Vec::with_capacity(b * n);
    for &i in idx {
        p.extend_from_slice(&data.positions.data()[i * 3..(i + 1) * 3]);
        z.extend_from_slice(&data.inputs.data()[i * n..(i + 1) * n]);
        t.extend_from_slice(&data.labels.data()[i * n..(i + 1) * n]);
    }
    (
        Tensor3::new(b, 3, 1, p).expect("sized"),
        Tensor3::new(b, 1, n, z).expect("sized"),
        Tensor3::new(b, 1, n, t).expect("sized"),
    )
}

/// Mean per-sample loss over `idx` in evaluation mode.
fn eval_loss(model: &mut CalibModel, data: &Prepared, idx: &[usize], chunk: usize) -> Result<f64, CalibError> {
    let n = model.n();
    let mut total = 0.0;
    for c in idx.chunks(chunk.max(1)) {
        let (p, z, t) = gather(data, c, n);
        let y = model.forward(&p, &z, Mode::Eval)?;
        let (loss, _) = mse_loss(&y, &t)?;
        total += loss * c.len() as f64;
    }
    Ok(total / idx.len().max(1) as f64)
}

fn prepare(model: &CalibModel, dataset: &[DftReport], mode: LabelMode) -> Result<Prepared, CalibError> {
    let n = model.n();
    let positions: Vec<_> = dataset.iter().map(|r| r.position).collect();
    let z: Vec<&[f64]> = dataset.iter().map(|r| r.z_baseline.as_slice()).collect();
    let (positions, inputs) = model.prepare_inputs(&positions, &z)?;
    let mut labels = Vec::with_capacity(dataset.len() * n);
    for (i, r) in dataset.iter().enumerate() {
        let l = build_labels(&r.z_target, mode).map_err(|e| match e {
            CalibError::ZeroTarget => CalibError::BadRecord {
                index: i,
                reason: "target weights are all zero",
            },
            other => other,
        })?;
        labels.extend(l);
    }
    Ok(Prepared {
        positions,
        inputs,
        labels: Tensor3::new(dataset.len(), 1, n, labels)?,
    })
}

/// Mean per-sample MSE of `model` against `mode` labels on `dataset`.
pub fn evaluate_loss(model: &mut CalibModel, dataset: &[DftReport], mode: LabelMode) -> Result<f64, CalibError> {
    let data = prepare(model, dataset, mode)?;
    let idx: Vec<usize> = (0..dataset.len()).collect();
    eval_loss(model, &data, &idx, 256)
}

/// Adam on the batch-mean squared error between the model output and the
/// labels, with a seeded train/validation split and early stopping.
pub fn train(
    dataset: &[DftReport],
    mode: LabelMode,
    model_config: ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, CalibError> {
    if dataset.is_empty() {
        return Err(CalibError::EmptyDataset);
    }
    mode.validate()?;
    let n = model_config.n;
    for (i, r) in dataset.iter().enumerate() {
        r.validate(n).map_err(|reason| CalibError::BadRecord { index: i, reason })?;
    }
    let mut model = CalibModel::new(model_config)?;
    model.set_position_box(PositionBox::from_positions(dataset.iter().map(|r| &r.position)));
    let data = prepare(&model, dataset, mode)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let (train_idx, val_idx) = if dataset.len() < 2 {
        (order.clone(), order)
    } else {
        let n_val = ((dataset.len() as f64 * cfg.val_fraction).round() as usize).clamp(1, dataset.len() - 1);
        let val = order[..n_val].to_vec();
        (order[n_val..].to_vec(), val)
    };

    let eval_chunk = 256;
    let mut log = Vec::with_capacity(cfg.epochs + 1);
    log.push(EpochLog {
        epoch: 0,
        train_loss: eval_loss(&mut model, &data, &train_idx, eval_chunk)?,
        val_loss: eval_loss(&mut model, &data, &val_idx, eval_chunk)?,
    });
    let mut best_epoch = 0;
    let mut best_store: ParamStore = model.store().clone();
    let mut since_best = 0;
    let mut shuffled = train_idx.clone();

    for epoch in 1..=cfg.epochs {
        shuffled.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, batch) in shuffled.chunks(cfg.batch_size.max(1)).enumerate() {
            let (p, z, t) = gather(&data, batch, n);
            model.store_mut().zero_grad();
            let y = model.forward(&p, &z, Mode::Train)?;
            let (loss, g) = mse_loss(&y, &t)?;
            if !loss.is_finite() {
                return Err(CalibError::Divergence { epoch, batch: bi, loss });
            }
            model.backward(&g)?;
            if !model.store().grads_finite() {
                return Err(CalibError::Divergence { epoch, batch: bi, loss: f64::NAN });
            }
            adam_step(model.store_mut(), &cfg.adam);
            total += loss * batch.len() as f64;
        }
        let train_loss = total / shuffled.len() as f64;
        let val_loss = eval_loss(&mut model, &data, &val_idx, eval_chunk)?;
        if !val_loss.is_finite() {
            return Err(CalibError::Divergence {
                epoch,
                batch: usize::MAX,
                loss: val_loss,
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < log[best_epoch].val_loss {
            best_epoch = epoch;
            best_store = model.store().clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log::info!("early stop at epoch {epoch}; best epoch {best_epoch}");
                break;
            }
        }
    }

    *model.store_mut() = best_store;
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}
