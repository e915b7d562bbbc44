// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fuse;
pub mod hog;
pub mod image;
pub mod kaze;
pub mod keyframe;
pub mod lbp;
pub mod learn;
pub mod synth;

pub use error::{Error, Result};

/// Seed used when none is given, so casual reruns reproduce.
pub const DEFAULT_SEED: u64 = 42;
