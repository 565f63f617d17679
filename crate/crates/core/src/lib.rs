//! Chest X-ray classification into covid, normal and pneumonia.
//!
//! Images are contrast-equalized and resized to 224×224. Each one yields
//! 308 handcrafted texture statistics and, optionally, a wide deep-feature
//! row from a frozen CNN backbone. The deep block is reduced with kernel
//! PCA fitted on training rows, appended to the handcrafted block,
//! standardized, and classified by three one-vs-rest linear SVMs.

pub mod classifier;
pub mod codec;
pub mod deepfeat;
pub mod error;
pub mod evalmetrics;
pub mod handcrafted;
pub mod label;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod rff;
pub mod stats;

pub use crate::error::{Error, Result};
pub use crate::label::{ClassLabel, NUM_CLASSES};
pub use crate::matrix::FeatureMatrix;
