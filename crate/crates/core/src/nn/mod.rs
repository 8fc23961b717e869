//! Reverse-mode kernels for the calibration network: 1D convolution and its
//! transpose, batch norm, ReLU, max pooling, linear layers, channel concat,
//! softmax, MSE, and Adam. No general autograd graph; each layer keeps the
//! cache its own backward needs.

use alloc::string::String;

use thiserror::Error;

mod gemm;
mod layers;
mod params;
mod tensor;

pub mod gradcheck;

pub use layers::{
    add_assign, concat_channels, mse_loss, softmax, split_channels, BatchNorm1d, Conv1d,
    ConvTranspose1d, Linear, MaxPool1d, Mode, Relu, Softmax, BN_EPS, BN_MOMENTUM,
};
pub use params::{adam_step, Adam, ParamId, ParamStore};
pub use tensor::Tensor3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("{op}: expected shape {expected:?}, got {got:?}")]
    Shape {
        op: &'static str,
        expected: [usize; 3],
        got: [usize; 3],
    },
    #[error("{0}: backward called before forward")]
    BackwardBeforeForward(&'static str),
    #[error("max pool needs an even, nonzero length, got {0}")]
    OddLength(usize),
    #[error("parameter {0} registered twice")]
    DuplicateParam(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("parameter {name}: expected {expected} values, got {got}")]
    ParamSize {
        name: String,
        expected: usize,
        got: usize,
    },
}
