//! Ensemble-style uncertainty estimation from a fixed pool of
//! controlled-overlap binary masks.
//!
//! A pool of `N` binary masks with `M` ones each is drawn over
//! `round(M * S)` positions; the scale `S` dials the mask overlap from
//! identical (`S = 1`, a single model) to nearly disjoint (large `S`,
//! independent subnetworks). The crate provides:
//!
//! - [`masks`]: pool generation, trimming, the closed-form expected
//!   retained width and IoU, and Monte Carlo estimators for both;
//! - [`tensor`] / [`autodiff`]: a minimal f64 tensor with reverse-mode
//!   differentiation for small MLPs;
//! - [`model`]: an MLP whose hidden activations are gated by the pool,
//!   trained with per-sample mask choice, evaluated as a mixture;
//! - [`data`]: synthetic two-sinusoid / blob / grid datasets and additive
//!   noise corruption;
//! - [`metrics`]: accuracy, entropy, binned ECE with reliability diagrams,
//!   OOD ROC/PR AUC, and pairwise diversity.
//!
//! Everything is deterministic per seed: random decisions draw from
//! ChaCha8 substreams keyed by `(seed, purpose, index)`, and the parallel
//! code paths (the `parallel` feature, on by default) collect in a fixed
//! order, so results are identical across thread counts and with the
//! feature disabled.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod exec;
pub mod masks;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use masks::{expected_iou, generate_masks, MaskSet, MaskSpec};
pub use model::{MasksemblesMlp, PredictionSet, TrainConfig, TrainReport};
pub use tensor::Tensor;
