//! Codebook-based CSI feedback aided by beam-domain priors.
//!
//! The BS ranks DFT codewords by a score vector, sends pilots precoded by the
//! top `P`, the user reports the normalized effective coefficients, and the
//! BS rebuilds the channel as a combination of the selected codewords.
//! Codeword indices are zero-based throughout.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::channel::{Channel, DftCodebook};
use crate::math::{inner, norm, sqrt, Complex64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("P = {p} is outside 1..={n}")]
    SelectionSize { p: usize, n: usize },
    #[error("score vector has {scores} entries, codebook has {n}")]
    DimensionMismatch { scores: usize, n: usize },
    #[error("received pilots are all zero; channel is unreconstructable")]
    Unreconstructable,
    #[error("cosine similarity of a zero vector is undefined")]
    ZeroVector,
    #[error("SNR must not be NaN")]
    InvalidSnr,
}

/// `P` distinct codeword indices, ordered by descending score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamSelection {
    indices: Vec<usize>,
}

impl BeamSelection {
    pub fn new(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Indices sorted ascending.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }
}

/// Indices of the `p` largest scores; ties go to the lower index.
pub fn select_top_p(scores: &[f64], p: usize) -> Result<BeamSelection, FeedbackError> {
    let n = scores.len();
    if p == 0 || p > n {
        return Err(FeedbackError::SelectionSize { p, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower indices first among equal scores
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(p);
    Ok(BeamSelection::new(order))
}

/// Noise variance for a per-antenna SNR: `‖h‖²·10^(-snr/10)/N`.
pub fn noise_variance(h: &Channel, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let energy = crate::math::norm_sqr(h.as_slice());
    if energy == 0.0 {
        log::warn!("zero channel: measuring pilots without noise");
        return 0.0;
    }
    energy * libm::pow(10.0, -snr_db / 10.0) / h.len() as f64
}

/// Received pilots `ŷ_p = hᴴq_p + n_p` with unit pilots and `n_p ~ CN(0, σ²)`.
///
/// The seed fixes one noise sample per codeword, so a beam's pilot does not
/// depend on which other beams were selected.
pub fn measure_pilots(
    h: &Channel,
    selection: &BeamSelection,
    codebook: &DftCodebook,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<Complex64>, FeedbackError> {
    if snr_db.is_nan() {
        return Err(FeedbackError::InvalidSnr);
    }
    if h.len() != codebook.size() {
        return Err(FeedbackError::DimensionMismatch {
            scores: h.len(),
            n: codebook.size(),
        });
    }
    let sigma2 = noise_variance(h, snr_db);
    let std = sqrt(sigma2 / 2.0);
    // one draw per codeword, so equal beam sets see equal noise whatever
    // their order
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Complex64> = (0..codebook.size())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * std, im * std)
        })
        .collect();
    Ok(selection
        .indices()
        .iter()
        .map(|&m| inner(h.as_slice(), codebook.column(m)) + noise[m])
        .collect())
}

/// Reported coefficients and the BS-side reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub x_hat: Vec<Complex64>,
    pub w_hat: Vec<Complex64>,
}

/// `x̂ = conj(ŷ)/‖ŷ‖`, `ŵ = Q̂x̂`.
pub fn estimate_and_reconstruct(
    pilots: &[Complex64],
    selection: &BeamSelection,
    codebook: &DftCodebook,
) -> Result<Reconstruction, FeedbackError> {
    let scale = norm(pilots);
    if scale == 0.0 {
        return Err(FeedbackError::Unreconstructable);
    }
    let x_hat: Vec<Complex64> = pilots.iter().map(|y| y.conj() / scale).collect();
    let w_hat = codebook.combine(selection.indices(), &x_hat);
    Ok(Reconstruction { x_hat, w_hat })
}

/// `|hᴴŵ| / (‖h‖‖ŵ‖)`, clamped into `[0, 1]`.
pub fn cosine_similarity(h: &[Complex64], w: &[Complex64]) -> Result<f64, FeedbackError> {
    let nh = norm(h);
    let nw = norm(w);
    if nh == 0.0 || nw == 0.0 {
        return Err(FeedbackError::ZeroVector);
    }
    Ok((inner(h, w).norm() / (nh * nw)).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackResult {
    pub selection: BeamSelection,
    pub x_hat: Vec<Complex64>,
    pub w_hat: Vec<Complex64>,
    pub rho: f64,
}

/// Full feedback round for one user: select by `scores`, measure, report,
/// reconstruct, and score against the true channel.
pub fn evaluate_selection(
    h_true: &Channel,
    scores: &[f64],
    p: usize,
    snr_db: f64,
    seed: u64,
    codebook: &DftCodebook,
) -> Result<FeedbackResult, FeedbackError> {
    if scores.len() != codebook.size() {
        return Err(FeedbackError::DimensionMismatch {
            scores: scores.len(),
            n: codebook.size(),
        });
    }
    let selection = select_top_p(scores, p)?;
    let pilots = measure_pilots(h_true, &selection, codebook, snr_db, seed)?;
    let Reconstruction { x_hat, w_hat } = estimate_and_reconstruct(&pilots, &selection, codebook)?;
    let rho = cosine_similarity(h_true.as_slice(), &w_hat)?;
    Ok(FeedbackResult {
        selection,
        x_hat,
        w_hat,
        rho,
    })
}

/// Score of using a twin channel directly as the CSI estimate. A zero
/// estimate scores 0.
pub fn evaluate_direct(h_true: &Channel, estimate: &Channel) -> Result<f64, FeedbackError> {
    if estimate.is_zero() {
        if h_true.is_zero() {
            return Err(FeedbackError::ZeroVector);
        }
        return Ok(0.0);
    }
    cosine_similarity(h_true.as_slice(), estimate.as_slice())
}

/// Per-user noise stream seed.
pub fn user_seed(base_seed: u64, user_index: usize) -> u64 {
    base_seed ^ user_index as u64
}
