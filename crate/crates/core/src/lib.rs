//! Vessel detection in dual-polarization (VV/VH) SAR intensity rasters.
//!
//! The crate covers the whole chain from raster to metrics:
//!
//! 1. [`scene_io`] – the scene data model, a small JSON + raw `f32` raster
//!    format, chip extraction and a seeded speckle/vessel scene generator.
//! 2. [`wavelet`] – orthonormal 2-D DWT (Haar, Daubechies-4) and
//!    homomorphic threshold denoising.
//! 3. [`cfar`] – cell-averaging and two-parameter CFAR with connected
//!    component clustering; the threshold baseline and the proposal stage.
//! 4. [`cnn`] – a from-scratch convolutional chip classifier with SGD
//!    training, weight files and warm start.
//! 5. [`detector`] – propose, score, non-maximum suppression.
//! 6. [`eval`] – dataset split, detection matching and the confusion-matrix
//!    metric suite (accuracy, precision, recall, F1, Cohen's kappa, Jaccard).
//! 7. [`pgm`] – 8-bit overlay and mask images.
//! 8. [`cli`] – the `sarvessel` subcommands (`synth`, `denoise`, `cfar`,
//!    `train`, `detect`, `eval`, `bench`).
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/`.

pub mod cfar;
pub mod cli;
pub mod cnn;
pub mod dataset;
pub mod detector;
mod error;
pub mod eval;
mod fsio;
pub mod grid;
pub mod pgm;
pub mod rng;
pub mod scene_io;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::Grid;
