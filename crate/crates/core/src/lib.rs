//! Source-free domain adaptation for segmentation via denoised
//! pseudo-labeling.
//!
//! A small segmentation network is trained on a synthetic source domain,
//! then adapted to a shifted target domain using only its own pseudo labels,
//! filtered by MC-dropout uncertainty and by feature distances to per-image
//! class prototypes.

pub mod adapt;
pub mod dataset;
pub mod denoise;
pub mod error;
pub mod io;
pub mod map;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use map::{Image, LabelMap, Map, ProbMap, SelectionMask, UncertaintyMap};
pub use rng::Rng;
