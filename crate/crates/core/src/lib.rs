#![no_std]

//! Compressive-sensing feature network.
//!
//! Convolution filters are learned per stage by measuring the DCT-domain
//! patch Gram matrix with a random Gaussian operator and recovering sparse
//! coefficient vectors by Orthogonal Matching Pursuit. Images are pushed
//! through the filter cascade, binarized, hashed into integer codes and
//! pooled into block histograms, which feed a one-vs-rest linear SVM.
//!
//! The crate needs only `alloc`; file formats and the command-line driver
//! live in the `csnet` crate.
//!
//! # Features
//! - `serde`: derives `Serialize`/`Deserialize` for models and configuration types.

extern crate alloc;

mod error;

pub mod classifier;
pub mod features;
pub mod filterbank;
pub mod network;
pub mod sensing;
pub mod tensor;

pub use crate::error::{Error, Result};
pub use crate::features::{BlockSpec, FeatureVector};
pub use crate::filterbank::{FilterBank, FilterMethod, LearningMeta, PatchConfig};
pub use crate::network::FeatureExtractor;
pub use crate::tensor::{Image, Matrix};
