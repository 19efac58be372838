//! Still-image action recognition through an intermediate superpixel layer.
//!
//! The pipeline, bottom to top:
//!
//! 1. [`imaging`] — PPM/PGM containers, color spaces, filtering.
//! 2. [`segmentation`] — graph-based over-segmentation into superpixels.
//! 3. [`descriptors`] — 451-D per-superpixel features: 51 appearance
//!    values plus a 400-word bag-of-features histogram.
//! 4. [`detector`] — multiclass linear classifier over superpixel
//!    descriptors, emitting a softmax posterior per superpixel.
//! 5. [`structmodel`] — the structural action model: joint features over
//!    (measurements, latent superpixel classes, action label), greedy and
//!    exact inference, and latent structural SVM training.
//! 6. [`harness`] — dataset ingestion, the one-vs-rest evaluation
//!    protocol, synthetic data generation and report emission.

pub mod config;
pub mod descriptors;
pub mod detector;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod segmentation;
pub mod structmodel;
pub(crate) mod util;

pub use error::{Error, Result};
