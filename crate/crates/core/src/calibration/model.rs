use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{normalize_input, CalibError, PositionBox};
use crate::math::Vec3;
use crate::nn::{
    add_assign, concat_channels, split_channels, BatchNorm1d, Conv1d, ConvTranspose1d, Linear,
    MaxPool1d, Mode, NnError, ParamStore, Relu, Softmax, Tensor3,
};

/// Hidden width of the position embedding MLP.
pub const EMBED_HIDDEN: usize = 64;

const POSITION_BOX: &str = "meta.position_box";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub n: usize,
    pub embed_hidden: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            embed_hidden: EMBED_HIDDEN,
            seed,
        }
    }
}

/// One row of a forward shape trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeRow {
    pub section: &'static str,
    pub stage: &'static str,
    pub layer: &'static str,
    pub inputs: Vec<Vec<usize>>,
    pub output: Vec<usize>,
}

/// conv k3 p1 → batch norm → ReLU.
#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv1d,
    bn: BatchNorm1d,
    relu: Relu,
}

impl ConvBlock {
    fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        Ok(Self {
            conv: Conv1d::same(store, &format!("{name}.conv"), cin, cout, rng)?,
            bn: BatchNorm1d::new(store, &format!("{name}.bn"), cout)?,
            relu: Relu::new(),
        })
    }

    fn forward(&mut self, store: &mut ParamStore, x: &Tensor3, mode: Mode) -> Result<Tensor3, NnError> {
        let h = self.conv.forward(store, x)?;
        let h = self.bn.forward(store, &h, mode)?;
        Ok(self.relu.forward(&h))
    }

    fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let g = self.relu.backward(dy)?;
        let g = self.bn.backward(store, &g)?;
        self.conv.backward(store, &g)
    }
}

#[derive(Debug, Clone)]
struct Stage {
    blocks: Vec<ConvBlock>,
}

impl Stage {
    fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        let blocks = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| ConvBlock::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect::<Result<_, _>>()?;
        Ok(Self { blocks })
    }

    fn forward(&mut self, store: &mut ParamStore, x: &Tensor3, mode: Mode) -> Result<Tensor3, NnError> {
        let mut h = x.clone();
        for b in &mut self.blocks {
            h = b.forward(store, &h, mode)?;
        }
        Ok(h)
    }

    fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let mut g = dy.clone();
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(store, &g)?;
        }
        Ok(g)
    }
}

/// Embedding MLP plus 1D U-Net with a softmax head.
///
/// Encoder widths 16/32/64/128 (one block at the first level, two below),
/// decoder 64/32/16 with skip concatenation, then a plain k3 convolution to
/// one channel and a softmax over the beam axis.
#[derive(Debug, Clone)]
pub struct CalibModel {
    config: ModelConfig,
    store: ParamStore,
    fc1: Linear,
    embed_relu: Relu,
    fc2: Linear,
    enc1: Stage,
    pool1: MaxPool1d,
    enc2: Stage,
    pool2: MaxPool1d,
    enc3: Stage,
    pool3: MaxPool1d,
    enc4: Stage,
    up1: ConvTranspose1d,
    dec1: Stage,
    up2: ConvTranspose1d,
    dec2: Stage,
    up3: ConvTranspose1d,
    dec3: Stage,
    head: Conv1d,
    softmax: Softmax,
    batch: Option<usize>,
}

impl CalibModel {
    pub fn new(config: ModelConfig) -> Result<Self, CalibError> {
        let n = config.n;
        if n == 0 || n % 8 != 0 {
            return Err(CalibError::BadResolution(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut s = ParamStore::new();
        let r = &mut rng;
        let fc1 = Linear::new(&mut s, "embed.fc1", 3, config.embed_hidden, r)?;
        let fc2 = Linear::new(&mut s, "embed.fc2", config.embed_hidden, n, r)?;
        let enc1 = Stage::new(&mut s, "enc1", &[2, 16], r)?;
        let enc2 = Stage::new(&mut s, "enc2", &[16, 32, 32], r)?;
        let enc3 = Stage::new(&mut s, "enc3", &[32, 64, 64], r)?;
        let enc4 = Stage::new(&mut s, "enc4", &[64, 128, 128], r)?;
        let up1 = ConvTranspose1d::doubling(&mut s, "up1", 128, 64, r)?;
        let dec1 = Stage::new(&mut s, "dec1", &[128, 64, 64], r)?;
        let up2 = ConvTranspose1d::doubling(&mut s, "up2", 64, 32, r)?;
        let dec2 = Stage::new(&mut s, "dec2", &[64, 32, 32], r)?;
        let up3 = ConvTranspose1d::doubling(&mut s, "up3", 32, 16, r)?;
        let dec3 = Stage::new(&mut s, "dec3", &[32, 16, 16], r)?;
        let head = Conv1d::same(&mut s, "head", 16, 1, r)?;
        s.register(POSITION_BOX, &[2, 3], vec![0.0; 6], false)?;
        Ok(Self {
            config,
            store: s,
            fc1,
            embed_relu: Relu::new(),
            fc2,
            enc1,
            pool1: MaxPool1d::new(),
            enc2,
            pool2: MaxPool1d::new(),
            enc3,
            pool3: MaxPool1d::new(),
            enc4,
            up1,
            dec1,
            up2,
            dec2,
            up3,
            dec3,
            head,
            softmax: Softmax::new(),
            batch: None,
        })
    }

    /// Rebuilds a model from a stored tensor set (a loaded checkpoint).
    pub fn from_store(stored: &ParamStore, seed: u64) -> Result<Self, CalibError> {
        let dims_of = |name: &str| {
            stored
                .id(name)
                .map(|id| stored.dims(id).to_vec())
                .ok_or_else(|| NnError::UnknownParam(name.to_string()))
        };
        let d = dims_of("embed.fc2.weight")?;
        if d.len() != 2 {
            return Err(CalibError::Nn(NnError::UnknownParam("embed.fc2.weight".to_string())));
        }
        let mut model = Self::new(ModelConfig {
            n: d[0],
            embed_hidden: d[1],
            seed,
        })?;
        let expected: Vec<_> = model.store.ids().collect();
        if expected.len() != stored.len() {
            return Err(CalibError::Nn(NnError::ParamSize {
                name: "tensor count".to_string(),
                expected: expected.len(),
                got: stored.len(),
            }));
        }
        for id in expected {
            let name = model.store.name(id).to_string();
            let src = stored
                .id(&name)
                .ok_or_else(|| NnError::UnknownParam(name.clone()))?;
            if stored.dims(src) != model.store.dims(id) {
                return Err(CalibError::Nn(NnError::ParamSize {
                    name,
                    expected: model.store.value(id).len(),
                    got: stored.value(src).len(),
                }));
            }
            model.store.set(&name, stored.value(src))?;
        }
        Ok(model)
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    pub fn position_box(&self) -> PositionBox {
        let v = self.store.value(self.store.id(POSITION_BOX).expect("registered"));
        PositionBox {
            min: Vec3::new(v[0], v[1], v[2]),
            max: Vec3::new(v[3], v[4], v[5]),
        }
    }

    pub fn set_position_box(&mut self, b: PositionBox) {
        let v = [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z];
        self.store.set(POSITION_BOX, &v).expect("registered");
    }

    /// `positions`: `(B, 3, 1)` standardized coordinates; `z`: `(B, 1, N)`
    /// normalized baseline weights. Returns `(B, 1, N)` on the simplex.
    pub fn forward(&mut self, positions: &Tensor3, z: &Tensor3, mode: Mode) -> Result<Tensor3, CalibError> {
        self.forward_impl(positions, z, mode, None)
    }

    /// Forward pass that also records every stage's input and output shapes.
    pub fn forward_traced(
        &mut self,
        positions: &Tensor3,
        z: &Tensor3,
        mode: Mode,
    ) -> Result<(Tensor3, Vec<ShapeRow>), CalibError> {
        let mut rows = Vec::new();
        let y = self.forward_impl(positions, z, mode, Some(&mut rows))?;
        Ok((y, rows))
    }

    fn forward_impl(
        &mut self,
        positions: &Tensor3,
        z: &Tensor3,
        mode: Mode,
        mut trace: Option<&mut Vec<ShapeRow>>,
    ) -> Result<Tensor3, CalibError> {
        let n = self.config.n;
        let b = z.batch();
        z.expect_dims("calibration input", [None, Some(1), Some(n)])?;
        positions.expect_dims("calibration positions", [Some(b), Some(3), Some(1)])?;
        let s = &mut self.store;

        let e = self.fc1.forward(s, positions)?;
        let e = self.embed_relu.forward(&e);
        let e = self.fc2.forward(s, &e)?;
        let e = Tensor3::new(b, 1, n, e.into_data())?;
        let x = concat_channels(z, &e)?;
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(ShapeRow {
                section: "input",
                stage: "Input & Concat",
                layer: "MLP",
                inputs: vec![vec![b, n], vec![b, 3]],
                output: x.dims().to_vec(),
            });
        }

        let mut record = |section, stage, layer, inputs: &[&Tensor3], output: &Tensor3| {
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(ShapeRow {
                    section,
                    stage,
                    layer,
                    inputs: inputs.iter().map(|t| t.dims().to_vec()).collect(),
                    output: output.dims().to_vec(),
                });
            }
        };

        let e1 = self.enc1.forward(s, &x, mode)?;
        record("encoder", "Layer 1", "Conv. Block", &[&x], &e1);
        let p1 = self.pool1.forward(&e1)?;
        record("encoder", "Downsample", "MaxPool", &[&e1], &p1);
        let e2 = self.enc2.forward(s, &p1, mode)?;
        record("encoder", "Layer 2", "2x Conv. Blocks", &[&p1], &e2);
        let p2 = self.pool2.forward(&e2)?;
        record("encoder", "Downsample", "MaxPool", &[&e2], &p2);
        let e3 = self.enc3.forward(s, &p2, mode)?;
        record("encoder", "Layer 3", "2x Conv. Blocks", &[&p2], &e3);
        let p3 = self.pool3.forward(&e3)?;
        record("encoder", "Downsample", "MaxPool", &[&e3], &p3);
        let e4 = self.enc4.forward(s, &p3, mode)?;
        record("encoder", "Layer 4", "2x Conv. Blocks", &[&p3], &e4);

        let u1 = self.up1.forward(s, &e4)?;
        record("decoder", "Upconv", "ConvTranspose", &[&e4], &u1);
        let c1 = concat_channels(&u1, &e3)?;
        let d1 = self.dec1.forward(s, &c1, mode)?;
        record("decoder", "Layer 1", "2x Conv. Blocks", &[&c1], &d1);
        let u2 = self.up2.forward(s, &d1)?;
        record("decoder", "Upconv", "ConvTranspose", &[&d1], &u2);
        let c2 = concat_channels(&u2, &e2)?;
        let d2 = self.dec2.forward(s, &c2, mode)?;
        record("decoder", "Layer 2", "2x Conv. Blocks", &[&c2], &d2);
        let u3 = self.up3.forward(s, &d2)?;
        record("decoder", "Upconv", "ConvTranspose", &[&d2], &u3);
        let c3 = concat_channels(&u3, &e1)?;
        let d3 = self.dec3.forward(s, &c3, mode)?;
        record("decoder", "Layer 3", "2x Conv. Blocks", &[&c3], &d3);

        let logits = self.head.forward(s, &d3)?;
        record("output", "Output Layer", "Conv", &[&d3], &logits);
        let y = self.softmax.forward(&logits);
        record("output", "Final Output", "Softmax", &[&logits], &y);
        self.batch = Some(b);
        Ok(y)
    }

    /// Accumulates parameter gradients for the last forward pass given
    /// `∂L/∂output`.
    pub fn backward(&mut self, dy: &Tensor3) -> Result<(), CalibError> {
        let b = self
            .batch
            .take()
            .ok_or(NnError::BackwardBeforeForward("calibration model"))?;
        let n = self.config.n;
        let s = &mut self.store;
        let g = self.softmax.backward(dy)?;
        let g = self.head.backward(s, &g)?;

        let g = self.dec3.backward(s, &g)?;
        let (g_u3, mut g_e1) = split_channels(&g, 16)?;
        let g = self.up3.backward(s, &g_u3)?;
        let g = self.dec2.backward(s, &g)?;
        let (g_u2, mut g_e2) = split_channels(&g, 32)?;
        let g = self.up2.backward(s, &g_u2)?;
        let g = self.dec1.backward(s, &g)?;
        let (g_u1, mut g_e3) = split_channels(&g, 64)?;
        let g_e4 = self.up1.backward(s, &g_u1)?;

        let g = self.enc4.backward(s, &g_e4)?;
        add_assign(&mut g_e3, &self.pool3.backward(&g)?)?;
        let g = self.enc3.backward(s, &g_e3)?;
        add_assign(&mut g_e2, &self.pool2.backward(&g)?)?;
        let g = self.enc2.backward(s, &g_e2)?;
        add_assign(&mut g_e1, &self.pool1.backward(&g)?)?;
        let g_x = self.enc1.backward(s, &g_e1)?;

        let (_, g_embed) = split_channels(&g_x, 1)?;
        let g = Tensor3::new(b, n, 1, g_embed.into_data())?;
        let g = self.fc2.backward(s, &g)?;
        let g = self.embed_relu.backward(&g)?;
        self.fc1.backward(s, &g)?;
        Ok(())
    }

    /// Builds the network inputs for raw positions and baseline weights.
    pub fn prepare_inputs(&self, positions: &[Vec3], z_baseline: &[&[f64]]) -> Result<(Tensor3, Tensor3), CalibError> {
        let n = self.config.n;
        let bx = self.position_box();
        let mut pos = Vec::with_capacity(positions.len() * 3);
        for p in positions {
            pos.extend_from_slice(&bx.standardize(*p));
        }
        let mut z = Vec::with_capacity(z_baseline.len() * n);
        for (i, w) in z_baseline.iter().enumerate() {
            if w.len() != n {
                return Err(CalibError::BadRecord {
                    index: i,
                    reason: "weight length differs from N",
                });
            }
            z.extend(normalize_input(w));
        }
        Ok((
            Tensor3::new(positions.len(), 3, 1, pos)?,
            Tensor3::new(z_baseline.len(), 1, n, z)?,
        ))
    }

    /// Refined weights for each user, evaluated in chunks with running
    /// batch-norm statistics.
    pub fn predict(&mut self, positions: &[Vec3], z_baseline: &[&[f64]]) -> Result<Vec<Vec<f64>>, CalibError> {
        const CHUNK: usize = 256;
        let n = self.config.n;
        let mut out = Vec::with_capacity(positions.len());
        for (pc, zc) in positions.chunks(CHUNK).zip(z_baseline.chunks(CHUNK)) {
            let (p, z) = self.prepare_inputs(pc, zc)?;
            let y = self.forward(&p, &z, Mode::Eval)?;
            self.batch = None;
            out.extend(y.data().chunks(n).map(|c| c.to_vec()));
        }
        Ok(out)
    }
}
