//! Layers with explicit forward caches. Each `backward` consumes the cache
//! left by the matching `forward`, accumulates parameter gradients into the
//! store, and returns the input gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::gemm::{gemm, View};
use super::{NnError, ParamId, ParamStore, Tensor3};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn take<T>(cache: &mut Option<T>, layer: &'static str) -> Result<T, NnError> {
    cache.take().ok_or(NnError::BackwardBeforeForward(layer))
}

/// Range `[o0, o1)` of strided indices `o` with `o·s + j − p` inside
/// `[0, len)`, clipped to `[0, count)`.
fn tap_range(j: usize, s: usize, p: usize, len: usize, count: usize) -> (usize, usize) {
    let lo = if p > j { (p - j).div_ceil(s) } else { 0 };
    let hi = if len + p > j { (len + p - j).div_ceil(s) } else { 0 };
    (lo.min(count), hi.min(count))
}

#[derive(Debug, Clone, Copy)]
struct Taps {
    k: usize,
    stride: usize,
    padding: usize,
}

impl Taps {
    /// Column matrix `(c·k, b·count)` with entry `[(ch, j), (bi, o)] =
    /// t[bi, ch, o·s + j − p]`, zero outside the signal.
    fn unfold(self, t: &Tensor3, count: usize) -> Vec<f64> {
        let [b, c, l] = t.dims();
        let width = b * count;
        let mut cols = vec![0.0; c * self.k * width];
        for ch in 0..c {
            for j in 0..self.k {
                let (o0, o1) = tap_range(j, self.stride, self.padding, l, count);
                if o0 >= o1 {
                    continue;
                }
                let p0 = o0 * self.stride + j - self.padding;
                let row = (ch * self.k + j) * width;
                for bi in 0..b {
                    let src = t.row(bi, ch)[p0..].iter().step_by(self.stride);
                    let dst = &mut cols[row + bi * count + o0..row + bi * count + o1];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = *s;
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Taps::unfold`]: scatter-adds a column matrix into `t`.
    fn fold(self, cols: &[f64], t: &mut Tensor3, count: usize) {
        let [b, c, l] = t.dims();
        let width = b * count;
        for ch in 0..c {
            for j in 0..self.k {
                let (o0, o1) = tap_range(j, self.stride, self.padding, l, count);
                if o0 >= o1 {
                    continue;
                }
                let p0 = o0 * self.stride + j - self.padding;
                let row = (ch * self.k + j) * width;
                for bi in 0..b {
                    let src = &cols[row + bi * count + o0..row + bi * count + o1];
                    let dst = t.row_mut(bi, ch)[p0..].iter_mut().step_by(self.stride);
                    for (d, s) in dst.zip(src) {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// `(c, b·l)` matrix view of a tensor's rows, batch-major columns.
fn to_matrix(t: &Tensor3) -> Vec<f64> {
    let [b, c, l] = t.dims();
    let mut m = vec![0.0; c * b * l];
    for bi in 0..b {
        for ch in 0..c {
            m[ch * b * l + bi * l..ch * b * l + (bi + 1) * l].copy_from_slice(t.row(bi, ch));
        }
    }
    m
}

fn from_matrix(m: &[f64], b: usize, c: usize, l: usize, bias: Option<&[f64]>) -> Tensor3 {
    let mut t = Tensor3::zeros(b, c, l);
    for bi in 0..b {
        for ch in 0..c {
            let src = &m[ch * b * l + bi * l..ch * b * l + (bi + 1) * l];
            let add = bias.map_or(0.0, |v| v[ch]);
            for (d, s) in t.row_mut(bi, ch).iter_mut().zip(src) {
                *d = s + add;
            }
        }
    }
    t
}

fn accumulate_bias(db: &mut [f64], dy: &Tensor3) {
    let [b, c, _] = dy.dims();
    for bi in 0..b {
        for (ch, g) in db.iter_mut().enumerate().take(c) {
            *g += dy.row(bi, ch).iter().sum::<f64>();
        }
    }
}

/// 1D cross-correlation, weight layout `(cout, cin, k)`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    cin: usize,
    cout: usize,
    taps: Taps,
    cache: Option<([usize; 3], Vec<f64>)>,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let fan_in = cin * k;
        let weight = store.register_uniform(&format!("{name}.weight"), &[cout, cin, k], fan_in, rng)?;
        let bias = store.register_uniform(&format!("{name}.bias"), &[cout], fan_in, rng)?;
        Ok(Self {
            weight,
            bias,
            cin,
            cout,
            taps: Taps {
                k,
                stride: stride.max(1),
                padding,
            },
            cache: None,
        })
    }

    /// Length-preserving `k = 3`, stride 1, padding 1 convolution.
    pub fn same<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Self::new(store, name, cin, cout, 3, 1, 1, rng)
    }

    pub fn output_len(&self, l: usize) -> usize {
        let t = self.taps;
        (l + 2 * t.padding).saturating_sub(t.k) / t.stride + 1
    }

    pub fn forward(&mut self, store: &ParamStore, x: &Tensor3) -> Result<Tensor3, NnError> {
        x.expect_dims("conv1d", [None, Some(self.cin), None])?;
        let [b, _, l] = x.dims();
        let k = self.taps.k;
        if l + 2 * self.taps.padding < k {
            return Err(NnError::Shape {
                op: "conv1d",
                expected: [b, self.cin, k],
                got: x.dims(),
            });
        }
        let lo = self.output_len(l);
        let cols = self.taps.unfold(x, lo);
        let mut y = vec![0.0; self.cout * b * lo];
        gemm(
            View::new(store.value(self.weight), self.cout, self.cin * k),
            View::new(&cols, self.cin * k, b * lo),
            0.0,
            &mut y,
        );
        self.cache = Some((x.dims(), cols));
        Ok(from_matrix(&y, b, self.cout, lo, Some(store.value(self.bias))))
    }

    pub fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let ([b, _, l], cols) = take(&mut self.cache, "conv1d")?;
        let lo = self.output_len(l);
        dy.expect_dims("conv1d backward", [Some(b), Some(self.cout), Some(lo)])?;
        let k = self.taps.k;
        accumulate_bias(store.grad_mut(self.bias), dy);
        let g = to_matrix(dy);
        let (w, dw) = store.value_and_grad(self.weight);
        gemm(
            View::new(&g, self.cout, b * lo),
            View::new(&cols, self.cin * k, b * lo).t(),
            1.0,
            dw,
        );
        let mut dcols = vec![0.0; self.cin * k * b * lo];
        gemm(
            View::new(w, self.cout, self.cin * k).t(),
            View::new(&g, self.cout, b * lo),
            0.0,
            &mut dcols,
        );
        let mut dx = Tensor3::zeros(b, self.cin, l);
        self.taps.fold(&dcols, &mut dx, lo);
        Ok(dx)
    }
}

/// 1D transposed convolution, weight layout `(cin, cout, k)`. Output length
/// is `(L − 1)·s − 2p + k + output_padding`.
#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    pub weight: ParamId,
    pub bias: ParamId,
    cin: usize,
    cout: usize,
    taps: Taps,
    output_padding: usize,
    cache: Option<([usize; 3], Vec<f64>)>,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        // fan-in as seen from each output tap
        let fan_in = cout * k;
        let weight = store.register_uniform(&format!("{name}.weight"), &[cin, cout, k], fan_in, rng)?;
        let bias = store.register_uniform(&format!("{name}.bias"), &[cout], fan_in, rng)?;
        Ok(Self {
            weight,
            bias,
            cin,
            cout,
            taps: Taps {
                k,
                stride: stride.max(1),
                padding,
            },
            output_padding,
            cache: None,
        })
    }

    /// `k = 3`, stride 2, padding 1, output padding 1: doubles the length.
    pub fn doubling<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Self::new(store, name, cin, cout, 3, 2, 1, 1, rng)
    }

    pub fn output_len(&self, l: usize) -> usize {
        let t = self.taps;
        ((l.max(1) - 1) * t.stride + t.k + self.output_padding).saturating_sub(2 * t.padding)
    }

    // The transpose of a strided conv: y = fold(Wᵀ x) over the output signal.
    pub fn forward(&mut self, store: &ParamStore, x: &Tensor3) -> Result<Tensor3, NnError> {
        x.expect_dims("conv_transpose1d", [None, Some(self.cin), None])?;
        let [b, _, l] = x.dims();
        let lo = self.output_len(l);
        let k = self.taps.k;
        let xm = to_matrix(x);
        let mut cols = vec![0.0; self.cout * k * b * l];
        gemm(
            View::new(store.value(self.weight), self.cin, self.cout * k).t(),
            View::new(&xm, self.cin, b * l),
            0.0,
            &mut cols,
        );
        let mut y = Tensor3::zeros(b, self.cout, lo);
        self.taps.fold(&cols, &mut y, l);
        let bias = store.value(self.bias);
        for bi in 0..b {
            for co in 0..self.cout {
                y.row_mut(bi, co).iter_mut().for_each(|v| *v += bias[co]);
            }
        }
        self.cache = Some((x.dims(), xm));
        Ok(y)
    }

    pub fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let ([b, _, l], xm) = take(&mut self.cache, "conv_transpose1d")?;
        let lo = self.output_len(l);
        dy.expect_dims("conv_transpose1d backward", [Some(b), Some(self.cout), Some(lo)])?;
        let k = self.taps.k;
        accumulate_bias(store.grad_mut(self.bias), dy);
        let dcols = self.taps.unfold(dy, l);
        let (w, dw) = store.value_and_grad(self.weight);
        gemm(
            View::new(&xm, self.cin, b * l),
            View::new(&dcols, self.cout * k, b * l).t(),
            1.0,
            dw,
        );
        let mut dxm = vec![0.0; self.cin * b * l];
        gemm(
            View::new(w, self.cin, self.cout * k),
            View::new(&dcols, self.cout * k, b * l),
            0.0,
            &mut dxm,
        );
        Ok(from_matrix(&dxm, b, self.cin, l, None))
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Tensor3,
    inv_std: Vec<f64>,
    mode: Mode,
}

/// Per-channel batch normalization over `(batch, length)`.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    c: usize,
    cache: Option<BnCache>,
}

impl BatchNorm1d {
    pub fn new(store: &mut ParamStore, name: &str, c: usize) -> Result<Self, NnError> {
        Ok(Self {
            gamma: store.register(&format!("{name}.gamma"), &[c], vec![1.0; c], true)?,
            beta: store.register(&format!("{name}.beta"), &[c], vec![0.0; c], true)?,
            running_mean: store.register(&format!("{name}.running_mean"), &[c], vec![0.0; c], false)?,
            running_var: store.register(&format!("{name}.running_var"), &[c], vec![1.0; c], false)?,
            c,
            cache: None,
        })
    }

    pub fn forward(&mut self, store: &mut ParamStore, x: &Tensor3, mode: Mode) -> Result<Tensor3, NnError> {
        x.expect_dims("batch_norm1d", [None, Some(self.c), None])?;
        let [b, c, l] = x.dims();
        let count = (b * l) as f64;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        match mode {
            Mode::Train => {
                for ch in 0..c {
                    let s: f64 = (0..b).map(|bi| x.row(bi, ch).iter().sum::<f64>()).sum();
                    let mu = s / count;
                    let ss: f64 = (0..b)
                        .map(|bi| x.row(bi, ch).iter().map(|v| (v - mu) * (v - mu)).sum::<f64>())
                        .sum();
                    mean[ch] = mu;
                    var[ch] = ss / count;
                }
                let unbias = if b * l > 1 { count / (count - 1.0) } else { 1.0 };
                let rm = store.value_mut(self.running_mean);
                for ch in 0..c {
                    rm[ch] = (1.0 - BN_MOMENTUM) * rm[ch] + BN_MOMENTUM * mean[ch];
                }
                let rv = store.value_mut(self.running_var);
                for ch in 0..c {
                    rv[ch] = (1.0 - BN_MOMENTUM) * rv[ch] + BN_MOMENTUM * var[ch] * unbias;
                }
            }
            Mode::Eval => {
                mean.copy_from_slice(store.value(self.running_mean));
                var.copy_from_slice(store.value(self.running_var));
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / sqrt(v + BN_EPS)).collect();
        let gamma = store.value(self.gamma);
        let beta = store.value(self.beta);
        let mut x_hat = Tensor3::zeros(b, c, l);
        let mut y = Tensor3::zeros(b, c, l);
        for bi in 0..b {
            for ch in 0..c {
                let xr = x.row(bi, ch);
                let hr = x_hat.row_mut(bi, ch);
                for (h, v) in hr.iter_mut().zip(xr) {
                    *h = (v - mean[ch]) * inv_std[ch];
                }
                let hr = x_hat.row(bi, ch).to_vec();
                for (o, h) in y.row_mut(bi, ch).iter_mut().zip(hr) {
                    *o = gamma[ch] * h + beta[ch];
                }
            }
        }
        self.cache = Some(BnCache { x_hat, inv_std, mode });
        Ok(y)
    }

    pub fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let BnCache { x_hat, inv_std, mode } = take(&mut self.cache, "batch_norm1d")?;
        let [b, c, l] = x_hat.dims();
        dy.expect_dims("batch_norm1d backward", [Some(b), Some(c), Some(l)])?;
        let count = (b * l) as f64;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for bi in 0..b {
            for ch in 0..c {
                for (g, h) in dy.row(bi, ch).iter().zip(x_hat.row(bi, ch)) {
                    sum_dy[ch] += g;
                    sum_dy_xhat[ch] += g * h;
                }
            }
        }
        {
            let (_, dgamma) = store.value_and_grad(self.gamma);
            for ch in 0..c {
                dgamma[ch] += sum_dy_xhat[ch];
            }
        }
        {
            let (_, dbeta) = store.value_and_grad(self.beta);
            for ch in 0..c {
                dbeta[ch] += sum_dy[ch];
            }
        }
        let gamma = store.value(self.gamma);
        let mut dx = Tensor3::zeros(b, c, l);
        for bi in 0..b {
            for ch in 0..c {
                let k = gamma[ch] * inv_std[ch];
                let g = dy.row(bi, ch);
                let h = x_hat.row(bi, ch);
                let out = dx.row_mut(bi, ch);
                match mode {
                    Mode::Train => {
                        for i in 0..l {
                            out[i] = k * (g[i] - sum_dy[ch] / count - h[i] * sum_dy_xhat[ch] / count);
                        }
                    }
                    Mode::Eval => {
                        for i in 0..l {
                            out[i] = k * g[i];
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor3) -> Tensor3 {
        let mut y = x.clone();
        let mut mask = Vec::with_capacity(x.data().len());
        for v in y.data_mut() {
            let on = *v > 0.0;
            mask.push(on);
            if !on {
                *v = 0.0;
            }
        }
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let mask = take(&mut self.mask, "relu")?;
        if mask.len() != dy.data().len() {
            return Err(NnError::Shape {
                op: "relu backward",
                expected: [mask.len(), 1, 1],
                got: dy.dims(),
            });
        }
        let mut dx = dy.clone();
        for (g, on) in dx.data_mut().iter_mut().zip(mask) {
            if !on {
                *g = 0.0;
            }
        }
        Ok(dx)
    }
}

/// Max pooling with `k = 3`, stride 2, padding 1 (padding never wins).
/// Ties resolve to the lowest input index.
#[derive(Debug, Clone, Default)]
pub struct MaxPool1d {
    cache: Option<([usize; 3], Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor3) -> Result<Tensor3, NnError> {
        let [b, c, l] = x.dims();
        if l % 2 != 0 || l == 0 {
            return Err(NnError::OddLength(l));
        }
        let lo = l / 2;
        let mut y = Tensor3::zeros(b, c, lo);
        let mut arg = Vec::with_capacity(b * c * lo);
        for bi in 0..b {
            for ch in 0..c {
                let xr = x.row(bi, ch);
                let out = y.row_mut(bi, ch);
                for (o, slot) in out.iter_mut().enumerate() {
                    let start = (2 * o).saturating_sub(1);
                    let end = (2 * o + 1).min(l - 1);
                    let mut best = start;
                    for p in start + 1..=end {
                        if xr[p] > xr[best] {
                            best = p;
                        }
                    }
                    *slot = xr[best];
                    arg.push(best);
                }
            }
        }
        self.cache = Some((x.dims(), arg));
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let ([b, c, l], arg) = take(&mut self.cache, "max_pool1d")?;
        dy.expect_dims("max_pool1d backward", [Some(b), Some(c), Some(l / 2)])?;
        let mut dx = Tensor3::zeros(b, c, l);
        let mut k = 0;
        for bi in 0..b {
            for ch in 0..c {
                let g = dy.row(bi, ch).to_vec();
                let out = dx.row_mut(bi, ch);
                for gv in g {
                    out[arg[k]] += gv;
                    k += 1;
                }
            }
        }
        Ok(dx)
    }
}

/// Fully connected layer on `(B, in, 1)` tensors, weight layout `(out, in)`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    fin: usize,
    fout: usize,
    cache: Option<Tensor3>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fin: usize,
        fout: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            weight: store.register_uniform(&format!("{name}.weight"), &[fout, fin], fin, rng)?,
            bias: store.register_uniform(&format!("{name}.bias"), &[fout], fin, rng)?,
            fin,
            fout,
            cache: None,
        })
    }

    pub fn forward(&mut self, store: &ParamStore, x: &Tensor3) -> Result<Tensor3, NnError> {
        x.expect_dims("linear", [None, Some(self.fin), Some(1)])?;
        let b = x.batch();
        let w = store.value(self.weight);
        let bias = store.value(self.bias);
        let mut y = Tensor3::zeros(b, self.fout, 1);
        for bi in 0..b {
            let xin = &x.data()[bi * self.fin..(bi + 1) * self.fin];
            let out = &mut y.data_mut()[bi * self.fout..(bi + 1) * self.fout];
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &w[o * self.fin..(o + 1) * self.fin];
                *slot = bias[o] + row.iter().zip(xin).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, store: &mut ParamStore, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let x = take(&mut self.cache, "linear")?;
        let b = x.batch();
        dy.expect_dims("linear backward", [Some(b), Some(self.fout), Some(1)])?;
        {
            let (_, db) = store.value_and_grad(self.bias);
            for bi in 0..b {
                for (o, g) in db.iter_mut().enumerate() {
                    *g += dy.data()[bi * self.fout + o];
                }
            }
        }
        let mut dx = Tensor3::zeros(b, self.fin, 1);
        let (w, dw) = store.value_and_grad(self.weight);
        for bi in 0..b {
            let xin = &x.data()[bi * self.fin..(bi + 1) * self.fin];
            let g = &dy.data()[bi * self.fout..(bi + 1) * self.fout];
            let dxr = &mut dx.data_mut()[bi * self.fin..(bi + 1) * self.fin];
            for (o, &gv) in g.iter().enumerate() {
                for i in 0..self.fin {
                    dw[o * self.fin + i] += gv * xin[i];
                    dxr[i] += gv * w[o * self.fin + i];
                }
            }
        }
        Ok(dx)
    }
}

/// Concatenates along the channel axis.
pub fn concat_channels(a: &Tensor3, b: &Tensor3) -> Result<Tensor3, NnError> {
    let [ba, ca, la] = a.dims();
    b.expect_dims("concat", [Some(ba), None, Some(la)])?;
    let cb = b.channels();
    let mut out = Tensor3::zeros(ba, ca + cb, la);
    for bi in 0..ba {
        for ch in 0..ca {
            out.row_mut(bi, ch).copy_from_slice(a.row(bi, ch));
        }
        for ch in 0..cb {
            out.row_mut(bi, ca + ch).copy_from_slice(b.row(bi, ch));
        }
    }
    Ok(out)
}

/// Inverse of [`concat_channels`] for gradients: first `ca` channels, rest.
pub fn split_channels(g: &Tensor3, ca: usize) -> Result<(Tensor3, Tensor3), NnError> {
    let [b, c, l] = g.dims();
    if ca > c {
        return Err(NnError::Shape {
            op: "split",
            expected: [b, ca, l],
            got: g.dims(),
        });
    }
    let mut first = Tensor3::zeros(b, ca, l);
    let mut second = Tensor3::zeros(b, c - ca, l);
    for bi in 0..b {
        for ch in 0..ca {
            first.row_mut(bi, ch).copy_from_slice(g.row(bi, ch));
        }
        for ch in ca..c {
            second.row_mut(bi, ch - ca).copy_from_slice(g.row(bi, ch));
        }
    }
    Ok((first, second))
}

/// In-place elementwise sum; shapes must agree.
pub fn add_assign(acc: &mut Tensor3, other: &Tensor3) -> Result<(), NnError> {
    if acc.dims() != other.dims() {
        return Err(NnError::Shape {
            op: "add",
            expected: acc.dims(),
            got: other.dims(),
        });
    }
    for (a, b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
    Ok(())
}

/// Softmax over the length axis of every `(batch, channel)` row.
#[derive(Debug, Clone, Default)]
pub struct Softmax {
    cache: Option<Tensor3>,
}

impl Softmax {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, x: &Tensor3) -> Tensor3 {
        let y = softmax(x);
        self.cache = Some(y.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor3) -> Result<Tensor3, NnError> {
        let y = take(&mut self.cache, "softmax")?;
        let [b, c, l] = y.dims();
        dy.expect_dims("softmax backward", [Some(b), Some(c), Some(l)])?;
        let mut dx = Tensor3::zeros(b, c, l);
        for bi in 0..b {
            for ch in 0..c {
                let yr = y.row(bi, ch);
                let g = dy.row(bi, ch);
                let s: f64 = yr.iter().zip(g).map(|(a, b)| a * b).sum();
                for (o, (yv, gv)) in dx.row_mut(bi, ch).iter_mut().zip(yr.iter().zip(g)) {
                    *o = yv * (gv - s);
                }
            }
        }
        Ok(dx)
    }
}

pub fn softmax(x: &Tensor3) -> Tensor3 {
    let [b, c, _] = x.dims();
    let mut y = x.clone();
    for bi in 0..b {
        for ch in 0..c {
            let row = y.row_mut(bi, ch);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = libm::exp(*v - m);
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
    }
    y
}

/// Batch mean of per-sample squared L2 error, and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor3, target: &Tensor3) -> Result<(f64, Tensor3), NnError> {
    let [b, c, l] = pred.dims();
    target.expect_dims("mse", [Some(b), Some(c), Some(l)])?;
    let scale = 1.0 / b.max(1) as f64;
    let mut grad = Tensor3::zeros(b, c, l);
    let mut loss = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d * scale;
    }
    Ok((loss * scale, grad))
}
