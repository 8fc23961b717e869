//! Central finite-difference checks for every layer in this module.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::math::sqrt;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d,
    ConvTranspose1d,
    BatchNormTrain,
    BatchNormEval,
    Relu,
    MaxPool1d,
    Linear,
    SoftmaxMse,
    Concat,
    ConvBlock,
}

impl LayerKind {
    pub const ALL: [LayerKind; 10] = [
        LayerKind::Conv1d,
        LayerKind::ConvTranspose1d,
        LayerKind::BatchNormTrain,
        LayerKind::BatchNormEval,
        LayerKind::Relu,
        LayerKind::MaxPool1d,
        LayerKind::Linear,
        LayerKind::SoftmaxMse,
        LayerKind::Concat,
        LayerKind::ConvBlock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv1d => "conv1d",
            LayerKind::ConvTranspose1d => "conv_transpose1d",
            LayerKind::BatchNormTrain => "batch_norm_train",
            LayerKind::BatchNormEval => "batch_norm_eval",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool1d => "max_pool1d",
            LayerKind::Linear => "linear",
            LayerKind::SoftmaxMse => "softmax_mse",
            LayerKind::Concat => "concat",
            LayerKind::ConvBlock => "conv_block",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub kind: LayerKind,
    pub input_dims: [usize; 3],
    /// Worst norm-wise relative error over the input and every trainable tensor.
    pub max_rel_error: f64,
    pub tensors_checked: usize,
}

/// Norms below this are treated as an exactly-zero gradient (a conv bias
/// feeding training-mode batch norm, for instance), where a pure ratio would
/// only measure round-off in the difference quotient.
pub const NORM_FLOOR: f64 = 1e-5;

/// `‖a − n‖ / max(‖a‖, ‖n‖, NORM_FLOOR)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum();
    let na: f64 = analytic.iter().map(|v| v * v).sum();
    let nn: f64 = numeric.iter().map(|v| v * v).sum();
    sqrt(diff) / sqrt(na.max(nn)).max(NORM_FLOOR)
}

enum Probe {
    Conv(Conv1d),
    ConvT(ConvTranspose1d),
    Bn(BatchNorm1d, Mode),
    Relu(Relu),
    Pool(MaxPool1d),
    Linear(Linear),
    SoftmaxMse(Softmax, Tensor3),
    Concat(Tensor3),
    Block(Conv1d, BatchNorm1d, Relu),
}

/// A layer plus a fixed linear readout `⟨f(x), r⟩` (or an MSE target).
struct Harness {
    probe: Probe,
    readout: Option<Tensor3>,
    grad_out: Option<Tensor3>,
}

impl Harness {
    fn loss(&mut self, store: &mut ParamStore, x: &Tensor3) -> Result<f64, NnError> {
        let y = match &mut self.probe {
            Probe::Conv(l) => l.forward(store, x)?,
            Probe::ConvT(l) => l.forward(store, x)?,
            Probe::Bn(l, mode) => l.forward(store, x, *mode)?,
            Probe::Relu(l) => l.forward(x),
            Probe::Pool(l) => l.forward(x)?,
            Probe::Linear(l) => l.forward(store, x)?,
            Probe::SoftmaxMse(s, target) => {
                let y = s.forward(x);
                let (loss, g) = mse_loss(&y, target)?;
                self.grad_out = Some(g);
                return Ok(loss);
            }
            Probe::Concat(other) => concat_channels(x, other)?,
            Probe::Block(c, b, r) => {
                let h = c.forward(store, x)?;
                let h = b.forward(store, &h, Mode::Train)?;
                r.forward(&h)
            }
        };
        let r = self.readout.as_ref().expect("readout");
        self.grad_out = Some(r.clone());
        Ok(y.dot(r))
    }

    fn backward(&mut self, store: &mut ParamStore) -> Result<Tensor3, NnError> {
        let g = self.grad_out.take().expect("loss before backward");
        match &mut self.probe {
            Probe::Conv(l) => l.backward(store, &g),
            Probe::ConvT(l) => l.backward(store, &g),
            Probe::Bn(l, _) => l.backward(store, &g),
            Probe::Relu(l) => l.backward(&g),
            Probe::Pool(l) => l.backward(&g),
            Probe::Linear(l) => l.backward(store, &g),
            Probe::SoftmaxMse(s, _) => s.backward(&g),
            Probe::Concat(other) => Ok(split_channels(&g, g.channels() - other.channels())?.0),
            Probe::Block(c, b, r) => {
                let g = r.backward(&g)?;
                let g = b.backward(store, &g)?;
                c.backward(store, &g)
            }
        }
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    let data = (0..dims[0] * dims[1] * dims[2])
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Tensor3::new(dims[0], dims[1], dims[2], data).expect("sized")
}

/// Entries bounded away from zero, so ReLU kinks stay outside the stencil.
fn off_kink_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    let mut t = random_tensor(rng, dims);
    for v in t.data_mut() {
        let mag = 0.05 + 0.95 * libm::fabs(*v);
        *v = if *v < 0.0 { -mag } else { mag };
    }
    t
}

/// Distinct entries at least 0.01 apart, so max-pool winners are stable.
fn separated_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Tensor3 {
    let n = dims[0] * dims[1] * dims[2];
    let mut ranks: Vec<usize> = (0..n).collect();
    ranks.shuffle(rng);
    let data = ranks
        .iter()
        .map(|&r| r as f64 * 0.01 + rng.random_range(0.0..0.002))
        .collect();
    Tensor3::new(dims[0], dims[1], dims[2], data).expect("sized")
}

/// Runs one randomized configuration of `kind` with sequence length `l`.
pub fn check(kind: LayerKind, l: usize, seed: u64) -> Result<GradCheck, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = rng.random_range(1..=3);
    let cin = rng.random_range(1..=4);
    let cout = rng.random_range(1..=4);
    let mut store = ParamStore::new();
    let (probe, x, out_dims) = match kind {
        LayerKind::Conv1d => {
            let stride = rng.random_range(1..=2);
            let layer = Conv1d::new(&mut store, "c", cin, cout, 3, stride, 1, &mut rng)?;
            let lo = layer.output_len(l);
            (Probe::Conv(layer), random_tensor(&mut rng, [b, cin, l]), [b, cout, lo])
        }
        LayerKind::ConvTranspose1d => {
            let layer = ConvTranspose1d::doubling(&mut store, "t", cin, cout, &mut rng)?;
            let lo = layer.output_len(l);
            (Probe::ConvT(layer), random_tensor(&mut rng, [b, cin, l]), [b, cout, lo])
        }
        LayerKind::BatchNormTrain | LayerKind::BatchNormEval => {
            let layer = BatchNorm1d::new(&mut store, "bn", cin)?;
            // non-trivial affine and running statistics
            for v in store.value_mut(layer.gamma) {
                *v = rng.random_range(0.5..1.5);
            }
            for v in store.value_mut(layer.beta) {
                *v = rng.random_range(-0.5..0.5);
            }
            for v in store.value_mut(layer.running_mean) {
                *v = rng.random_range(-0.5..0.5);
            }
            for v in store.value_mut(layer.running_var) {
                *v = rng.random_range(0.5..1.5);
            }
            let mode = if kind == LayerKind::BatchNormTrain {
                Mode::Train
            } else {
                Mode::Eval
            };
            (Probe::Bn(layer, mode), random_tensor(&mut rng, [b, cin, l]), [b, cin, l])
        }
        LayerKind::Relu => (Probe::Relu(Relu::new()), off_kink_tensor(&mut rng, [b, cin, l]), [b, cin, l]),
        LayerKind::MaxPool1d => (
            Probe::Pool(MaxPool1d::new()),
            separated_tensor(&mut rng, [b, cin, l]),
            [b, cin, l / 2],
        ),
        LayerKind::Linear => {
            let fin = l.min(8);
            let layer = Linear::new(&mut store, "fc", fin, cout + 2, &mut rng)?;
            (Probe::Linear(layer), random_tensor(&mut rng, [b, fin, 1]), [b, cout + 2, 1])
        }
        LayerKind::SoftmaxMse => {
            let target = softmax(&random_tensor(&mut rng, [b, 1, l]));
            (
                Probe::SoftmaxMse(Softmax::new(), target),
                random_tensor(&mut rng, [b, 1, l]),
                [b, 1, l],
            )
        }
        LayerKind::Concat => {
            let other = random_tensor(&mut rng, [b, cout, l]);
            (Probe::Concat(other), random_tensor(&mut rng, [b, cin, l]), [b, cin + cout, l])
        }
        LayerKind::ConvBlock => {
            let conv = Conv1d::same(&mut store, "blk.conv", cin, cout, &mut rng)?;
            let bn = BatchNorm1d::new(&mut store, "blk.bn", cout)?;
            (
                Probe::Block(conv, bn, Relu::new()),
                random_tensor(&mut rng, [b, cin, l]),
                [b, cout, l],
            )
        }
    };
    let readout = random_tensor(&mut rng, out_dims);
    let mut h = Harness {
        probe,
        readout: Some(readout),
        grad_out: None,
    };

    store.zero_grad();
    h.loss(&mut store, &x)?;
    let dx = h.backward(&mut store)?;

    let mut worst = 0.0_f64;
    let mut checked = 1;

    let mut xp = x.clone();
    let mut numeric = Vec::with_capacity(x.data().len());
    for k in 0..x.data().len() {
        let orig = xp.data()[k];
        xp.data_mut()[k] = orig + STEP;
        let lp = h.loss(&mut store, &xp)?;
        xp.data_mut()[k] = orig - STEP;
        let lm = h.loss(&mut store, &xp)?;
        xp.data_mut()[k] = orig;
        numeric.push((lp - lm) / (2.0 * STEP));
    }
    worst = worst.max(relative_error(dx.data(), &numeric));

    let ids: Vec<ParamId> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for id in ids {
        let analytic = store.grad(id).to_vec();
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let orig = store.value(id)[k];
            store.value_mut(id)[k] = orig + STEP;
            let lp = h.loss(&mut store, &x)?;
            store.value_mut(id)[k] = orig - STEP;
            let lm = h.loss(&mut store, &x)?;
            store.value_mut(id)[k] = orig;
            numeric.push((lp - lm) / (2.0 * STEP));
        }
        worst = worst.max(relative_error(&analytic, &numeric));
        checked += 1;
    }

    Ok(GradCheck {
        kind,
        input_dims: x.dims(),
        max_rel_error: worst,
        tensors_checked: checked,
    })
}

pub const LENGTHS: [usize; 3] = [8, 16, 32];

/// `count` configurations cycling through every layer kind and length.
pub fn suite(count: usize, seed: u64) -> Result<Vec<GradCheck>, NnError> {
    (0..count)
        .map(|i| {
            let kind = LayerKind::ALL[i % LayerKind::ALL.len()];
            let l = LENGTHS[(i / LayerKind::ALL.len()) % LENGTHS.len()];
            check(kind, l, seed.wrapping_add(i as u64))
        })
        .collect()
}
