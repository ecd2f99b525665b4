//! Frequency-domain forensics for generated images.
//!
//! The crate covers the full analysis chain: decoding and preprocessing
//! ([`preprocess`]), DFT/DCT spectra and reduced spectra ([`transforms`]),
//! robustness perturbations ([`perturb`]), linear frequency-feature
//! detectors ([`classifier`]), detector metrics ([`metrics`]), feature-space
//! MMD ([`featurespace`]), diffusion-process analytics ([`diffusion`]),
//! dataset bookkeeping and caching ([`manifest`]), and the command layer
//! used by the `freqscope` binary ([`commands`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod commands;
pub mod diffusion;
pub mod error;
pub mod featurespace;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod perturb;
pub mod preprocess;
pub mod rng;
pub mod transforms;

pub use error::{Error, Result};
pub use preprocess::{GrayImage, RgbImage};
pub use transforms::{ReducedSpectrum, Spectrum2D, SpectrumKind};
