use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::NnError;
use crate::math::sqrt;

/// Handle to a tensor registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    dims: Vec<usize>,
    value: Vec<f64>,
    grad: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    trainable: bool,
}

/// Named parameters with gradient and Adam moment buffers.
///
/// Non-trainable entries (batch-norm running statistics) live here too so a
/// checkpoint captures the full inference state; they carry no gradient and
/// are skipped by the optimizer and by [`ParamStore::param_count`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        dims: &[usize],
        value: Vec<f64>,
        trainable: bool,
    ) -> Result<ParamId, NnError> {
        let size: usize = dims.iter().product();
        if value.len() != size {
            return Err(NnError::ParamSize {
                name: name.to_string(),
                expected: size,
                got: value.len(),
            });
        }
        if self.by_name.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let id = self.entries.len();
        self.entries.push(Entry {
            name: name.to_string(),
            dims: dims.to_vec(),
            grad: vec![0.0; size],
            m: vec![0.0; size],
            v: vec![0.0; size],
            value,
            trainable,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    /// Trainable tensor drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn register_uniform<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        dims: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId, NnError> {
        let bound = 1.0 / sqrt(fan_in.max(1) as f64);
        let size: usize = dims.iter().product();
        let value = (0..size).map(|_| rng.random_range(-bound..bound)).collect();
        self.register(name, dims, value, true)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn dims(&self, id: ParamId) -> &[usize] {
        &self.entries[id.0].dims
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id.0].grad
    }

    /// Value (read) and gradient (write) of one tensor at once.
    pub fn value_and_grad(&mut self, id: ParamId) -> (&[f64], &mut [f64]) {
        let e = &mut self.entries[id.0];
        (&e.value, &mut e.grad)
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    /// Overwrites a tensor by name, keeping its shape.
    pub fn set(&mut self, name: &str, value: &[f64]) -> Result<(), NnError> {
        let id = self
            .id(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))?;
        let e = &mut self.entries[id.0];
        if e.value.len() != value.len() {
            return Err(NnError::ParamSize {
                name: name.to_string(),
                expected: e.value.len(),
                got: value.len(),
            });
        }
        e.value.copy_from_slice(value);
        Ok(())
    }

    /// Ids in name order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.by_name.values().map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn grads_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.grad.iter().all(|g| g.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every trainable tensor, in name order.
pub fn adam_step(store: &mut ParamStore, cfg: &Adam) {
    store.step += 1;
    let t = store.step as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    let order: Vec<usize> = store.by_name.values().copied().collect();
    for i in order {
        let e = &mut store.entries[i];
        if !e.trainable {
            continue;
        }
        for k in 0..e.value.len() {
            let g = e.grad[k];
            e.m[k] = cfg.beta1 * e.m[k] + (1.0 - cfg.beta1) * g;
            e.v[k] = cfg.beta2 * e.v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = e.m[k] / c1;
            let v_hat = e.v[k] / c2;
            e.value[k] -= cfg.lr * m_hat / (sqrt(v_hat) + cfg.eps);
        }
    }
}
