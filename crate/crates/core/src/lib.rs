//! Camera-trap image analysis: animal detection with a linear SVM over pooled
//! convolutional features, species and individual recognition with a
//! two-stream region-scoring head, patch-based segmentation, and the
//! evaluation and experiment protocols that tie them together.
//!
//! Everything runs at desk scale on the synthetic corpus in [`synth`], and
//! every random choice is a pure function of an explicit seed.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod features;
pub mod image;
pub mod predictions;
pub mod rng;
pub mod segmentation;
pub mod svm;
pub mod synth;
pub mod wsddn;

pub use error::{Error, Result};

/// Version string embedded in every experiment report.
pub const VERSION: &str = concat!("camtrap ", env!("CARGO_PKG_VERSION"));
