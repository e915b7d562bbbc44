//! KAZE features: nonlinear scale space, Hessian keypoints and M-SURF
//! descriptors, flattened into one fixed-length vector per image.
//!
//! The vector holds the descriptors of the `m / 64` strongest keypoints in
//! descending response order, zero-padded when fewer are found.

mod descriptor;
mod detector;
mod scale_space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub use descriptor::{describe_keypoint, dominant_orientation, Descriptor, DESCRIPTOR_LEN};
pub use detector::{detect_keypoints, keypoint_order, KazeKeypoint};
pub use scale_space::{
    aos_step, build_scale_space, contrast_factor, gaussian_blur, Level, ScaleSpace, MIN_DETECTION_SIZE,
};

/// Where keypoints are detected when the source frame is larger than the
/// working thumbnail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KazeResolution {
    /// Everything runs on the resized thumbnail.
    Working,
    /// Detect and describe on the source-resolution grayscale frame.
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KazeParams {
    pub octaves: usize,
    pub sublevels: usize,
    /// Fixed contrast factor; `None` derives it from the image.
    pub contrast_k: Option<f64>,
    pub contrast_percentile: f64,
    pub detector_threshold: f64,
    /// Total output length; a positive multiple of 64.
    pub m: usize,
    pub base_sigma: f64,
    pub resolution: KazeResolution,
}

impl Default for KazeParams {
    fn default() -> Self {
        KazeParams {
            octaves: 2,
            sublevels: 4,
            contrast_k: None,
            contrast_percentile: 0.7,
            detector_threshold: 1e-3,
            m: 256,
            base_sigma: 1.6,
            resolution: KazeResolution::Working,
        }
    }
}

impl KazeParams {
    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 {
            return Err(Error::InvalidParameter("KAZE needs at least one octave".into()));
        }
        if self.sublevels < 2 {
            return Err(Error::InvalidParameter("KAZE needs at least two sublevels".into()));
        }
        if self.m == 0 || !self.m.is_multiple_of(DESCRIPTOR_LEN) {
            return Err(Error::InvalidParameter(format!(
                "KAZE vector length must be a positive multiple of {DESCRIPTOR_LEN}, got {}",
                self.m
            )));
        }
        if !(self.detector_threshold > 0.0) {
            return Err(Error::InvalidParameter("KAZE detector threshold must be > 0".into()));
        }
        if !(self.base_sigma > 0.0) {
            return Err(Error::InvalidParameter("KAZE base sigma must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.contrast_percentile) {
            return Err(Error::InvalidParameter(
                "KAZE contrast percentile must lie in [0, 1]".into(),
            ));
        }
        if let Some(k) = self.contrast_k {
            if !(k > 0.0) {
                return Err(Error::InvalidParameter("KAZE contrast factor must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn max_keypoints(&self) -> usize {
        self.m / DESCRIPTOR_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KazeVector {
    pub vector: Vec<f64>,
    pub kp_used: usize,
    /// The keypoints that were encoded, in vector order.
    pub keypoints: Vec<KazeKeypoint>,
}

pub fn kaze_vector(img: &GrayImage, params: &KazeParams) -> Result<KazeVector> {
    params.validate()?;
    let space = build_scale_space(img, params);
    Ok(vector_from_space(&space, params))
}

pub fn vector_from_space(space: &ScaleSpace, params: &KazeParams) -> KazeVector {
    let mut keypoints = detect_keypoints(space, params);
    keypoints.truncate(params.max_keypoints());
    let mut vector = vec![0.0; params.m];
    for (i, kp) in keypoints.iter_mut().enumerate() {
        let d = describe_keypoint(space, kp);
        kp.orientation = d.orientation;
        vector[i * DESCRIPTOR_LEN..(i + 1) * DESCRIPTOR_LEN].copy_from_slice(&d.values);
    }
    KazeVector {
        vector,
        kp_used: keypoints.len(),
        keypoints,
    }
}

/// Grayscale copy of `img` with a cross drawn at every keypoint.
pub fn keypoint_overlay(img: &GrayImage, keypoints: &[KazeKeypoint]) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut data = img.data().to_vec();
    for kp in keypoints {
        let (cx, cy) = (kp.x.round() as isize, kp.y.round() as isize);
        let arm = kp.sigma.round().max(1.0) as isize;
        for d in -arm..=arm {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    data[y as usize * w + x as usize] = 255.0;
                }
            }
        }
    }
    GrayImage::new(w, h, data).expect("overlay keeps dimensions and range")
}
