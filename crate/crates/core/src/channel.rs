//! ULA array response, multipath channel synthesis, and the unitary DFT
//! codebook used to express channels as beam-domain weights.
//!
//! Array convention: element `n` of the response to a departure direction
//! with azimuth `φ` and elevation `θ` is `exp(jπ·n·cos θ·cos φ)`, i.e.
//! half-wavelength spacing along the array axis.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{cis, inner, sqrt, Complex64, PI};
use crate::propagation::PathList;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("dimension mismatch: channel has {channel} entries, codebook has {codebook}")]
    DimensionMismatch { channel: usize, codebook: usize },
}

/// Downlink channel vector, one complex entry per BS antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel(pub Vec<Complex64>);

impl Channel {
    pub fn zeros(n: usize) -> Self {
        Channel(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::math::norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }
}

pub fn array_response(azimuth: f64, elevation: f64, n: usize) -> Vec<Complex64> {
    let u = libm::cos(elevation) * libm::cos(azimuth);
    (0..n).map(|i| cis(PI * i as f64 * u)).collect()
}

/// `h = Σ gain · a(φ, θ)` over the path list.
pub fn synthesize_channel(paths: &PathList, n: usize) -> Channel {
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    for p in &paths.paths {
        let a = array_response(p.azimuth_rad, p.elevation_rad, n);
        for (hi, ai) in h.iter_mut().zip(a) {
            *hi += p.gain * ai;
        }
    }
    Channel(h)
}

/// Unitary `N×N` DFT matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DftCodebook {
    n: usize,
    columns: Vec<Complex64>,
}

impl DftCodebook {
    pub fn new(n: usize) -> Self {
        let scale = 1.0 / sqrt(n as f64);
        let mut columns = Vec::with_capacity(n * n);
        for m in 0..n {
            for i in 0..n {
                // reduce the exponent mod n before scaling to keep the phase exact
                let k = (i * m) % n;
                columns.push(cis(2.0 * PI * k as f64 / n as f64) * scale);
            }
        }
        Self { n, columns }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn column(&self, m: usize) -> &[Complex64] {
        &self.columns[m * self.n..(m + 1) * self.n]
    }

    /// `Dᴴh`.
    pub fn project(&self, h: &[Complex64]) -> Result<Vec<Complex64>, ChannelError> {
        if h.len() != self.n {
            return Err(ChannelError::DimensionMismatch {
                channel: h.len(),
                codebook: self.n,
            });
        }
        Ok((0..self.n).map(|m| inner(self.column(m), h)).collect())
    }

    /// `Σ_p coeffs[p] · d_{indices[p]}`.
    pub fn combine(&self, indices: &[usize], coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (&m, &c) in indices.iter().zip(coeffs) {
            for (o, d) in out.iter_mut().zip(self.column(m)) {
                *o += c * d;
            }
        }
        out
    }
}

/// Beam-domain magnitudes `z = |Dᴴh|`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftWeights(pub Vec<f64>);

impl DftWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l2(&self) -> f64 {
        sqrt(self.0.iter().map(|v| v * v).sum())
    }

    /// Weights scaled to unit L1 norm; all-zero weights stay zero.
    pub fn l1_normalized(&self) -> Vec<f64> {
        let s = self.l1();
        if s > 0.0 {
            self.0.iter().map(|v| v / s).collect()
        } else {
            self.0.clone()
        }
    }
}

pub fn dft_weights(h: &Channel, codebook: &DftCodebook) -> Result<DftWeights, ChannelError> {
    Ok(DftWeights(
        codebook.project(&h.0)?.iter().map(|c| c.norm()).collect(),
    ))
}
