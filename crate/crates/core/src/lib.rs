//! Digital-twin calibration of DFT-domain channel information.
//!
//! A low-fidelity twin (the `baseline` tracer profile) produces beam-domain
//! weights quickly but inaccurately. A small position-conditioned 1D U-Net
//! refines them toward what a high-fidelity twin (the `target` profile) would
//! produce, and the refined weights pick the codewords used for pilot-based
//! codebook CSI feedback.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, experiments,
//! and the command line live in the `twincal` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod calibration;
pub mod channel;
pub mod feedback;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod propagation;
pub mod scene;

pub use channel::{Channel, DftCodebook, DftWeights};
pub use math::{Complex64, Vec3};
pub use propagation::{Path, PathKind, PathList, Tracer};
pub use scene::{load_scene, FidelityProfile, Prism, ProfileKind, Scene, UserGrid};
