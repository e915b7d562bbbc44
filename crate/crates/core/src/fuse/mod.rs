//! Feature-level fusion: per-image extraction for each scheme, plain
//! concatenation of two feature vectors, dataset assembly and feature files.

mod dataset;
mod io;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hog::{hog_descriptor, HogParams};
use crate::image::{load_image, log_transform, resize, GrayImage, WORKING_SIZE};
use crate::kaze::{kaze_vector, KazeParams, KazeResolution};
use crate::lbp::{lbp_histogram, LbpParams};

pub use dataset::{prepare_dataset, Dataset, PrepareSummary, CLASS_DIRS};
pub use io::{append_features, export_features, import_features, FEATURE_FILE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "lbp")]
    Lbp,
    #[serde(rename = "hog")]
    Hog,
    #[serde(rename = "kaze")]
    Kaze,
    #[serde(rename = "lbp+kaze")]
    LbpKaze,
    #[serde(rename = "hog+kaze")]
    HogKaze,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Lbp, Scheme::Hog, Scheme::Kaze, Scheme::LbpKaze, Scheme::HogKaze];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lbp => "lbp",
            Scheme::Hog => "hog",
            Scheme::Kaze => "kaze",
            Scheme::LbpKaze => "lbp+kaze",
            Scheme::HogKaze => "hog+kaze",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown scheme `{s}` (expected lbp, hog, kaze, lbp+kaze or hog+kaze)"
                ))
            })
    }
}

/// Everything that shapes a feature row. Two datasets can only be mixed when
/// their fingerprints agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorParams {
    /// Side of the square working image.
    pub resize: usize,
    pub log_transform: bool,
    pub lbp: LbpParams,
    pub hog: HogParams,
    pub kaze: KazeParams,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        ExtractorParams {
            resize: WORKING_SIZE,
            log_transform: true,
            lbp: LbpParams::default(),
            hog: HogParams::default(),
            kaze: KazeParams::default(),
        }
    }
}

impl ExtractorParams {
    pub fn validate(&self, scheme: Scheme) -> Result<()> {
        if self.resize == 0 {
            return Err(Error::InvalidParameter("resize target must be at least 1 px".into()));
        }
        match scheme {
            Scheme::Lbp => self.lbp.validate(),
            Scheme::Hog => self.hog.validate(),
            Scheme::Kaze => self.kaze.validate(),
            Scheme::LbpKaze => self.lbp.validate().and(self.kaze.validate()),
            Scheme::HogKaze => self.hog.validate().and(self.kaze.validate()),
        }
    }

    /// Hex SHA-256 (first 16 bytes) of the canonical JSON of the scheme and
    /// the parameters it actually uses.
    pub fn fingerprint(&self, scheme: Scheme) -> String {
        let mut canon = serde_json::json!({
            "scheme": scheme,
            "resize": self.resize,
            "log_transform": self.log_transform,
        });
        let uses = |part: &str| match part {
            "lbp" => matches!(scheme, Scheme::Lbp | Scheme::LbpKaze),
            "hog" => matches!(scheme, Scheme::Hog | Scheme::HogKaze),
            _ => matches!(scheme, Scheme::Kaze | Scheme::LbpKaze | Scheme::HogKaze),
        };
        let map = canon.as_object_mut().expect("object literal");
        if uses("lbp") {
            map.insert("lbp".into(), serde_json::to_value(self.lbp).expect("params serialize"));
        }
        if uses("hog") {
            map.insert("hog".into(), serde_json::to_value(self.hog).expect("params serialize"));
        }
        if uses("kaze") {
            map.insert(
                "kaze".into(),
                serde_json::to_value(self.kaze).expect("params serialize"),
            );
        }
        // serde_json maps are sorted, so the text is canonical
        let digest = Sha256::digest(canon.to_string().as_bytes());
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Row length for `scheme` under these parameters.
    pub fn feature_len(&self, scheme: Scheme) -> usize {
        let lbp = self.lbp.histogram_len();
        let hog = self.hog.descriptor_len(self.resize, self.resize);
        let kaze = self.kaze.m;
        match scheme {
            Scheme::Lbp => lbp,
            Scheme::Hog => hog,
            Scheme::Kaze => kaze,
            Scheme::LbpKaze => lbp + kaze,
            Scheme::HogKaze => hog + kaze,
        }
    }
}

/// One extractor's output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    scheme: Scheme,
    fingerprint: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, scheme: Scheme, fingerprint: String) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("feature vectors cannot be empty".into()));
        }
        Ok(FeatureVector {
            values,
            scheme,
            fingerprint,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Vec<f64>,
    pub left_len: usize,
    pub right_len: usize,
}

impl FusedVector {
    pub fn left(&self) -> &[f64] {
        &self.values[..self.left_len]
    }

    pub fn right(&self) -> &[f64] {
        &self.values[self.left_len..]
    }
}

/// `a ∥ b`, with no rescaling.
pub fn combine(a: &FeatureVector, b: &FeatureVector) -> FusedVector {
    let mut values = Vec::with_capacity(a.len() + b.len());
    values.extend_from_slice(a.values());
    values.extend_from_slice(b.values());
    FusedVector {
        values,
        left_len: a.len(),
        right_len: b.len(),
    }
}

/// Grayscale source → working image (resize, then optional log transform).
pub fn working_image(src: &GrayImage, params: &ExtractorParams) -> Result<GrayImage> {
    let small = resize(src, params.resize, params.resize)?;
    Ok(if params.log_transform {
        log_transform(&small)
    } else {
        small
    })
}

fn kaze_input(src: &GrayImage, working: &GrayImage, params: &ExtractorParams) -> GrayImage {
    match params.kaze.resolution {
        KazeResolution::Working => working.clone(),
        KazeResolution::Source if params.log_transform => log_transform(src),
        KazeResolution::Source => src.clone(),
    }
}

/// Feature row of one decoded image.
pub fn extract_features(src: &GrayImage, scheme: Scheme, params: &ExtractorParams) -> Result<FeatureVector> {
    params.validate(scheme)?;
    let working = working_image(src, params)?;
    let lbp = || -> Result<Vec<f64>> { Ok(lbp_histogram(&working, &params.lbp)?.bins) };
    let hog = || -> Result<Vec<f64>> { Ok(hog_descriptor(&working, &params.hog)?.vector) };
    let kaze = || -> Result<Vec<f64>> { Ok(kaze_vector(&kaze_input(src, &working, params), &params.kaze)?.vector) };
    let fp = params.fingerprint(scheme);
    let single = |values: Vec<f64>| FeatureVector::new(values, scheme, fp.clone());
    match scheme {
        Scheme::Lbp => single(lbp()?),
        Scheme::Hog => single(hog()?),
        Scheme::Kaze => single(kaze()?),
        Scheme::LbpKaze | Scheme::HogKaze => {
            let (left_scheme, left) = if scheme == Scheme::LbpKaze {
                (Scheme::Lbp, lbp()?)
            } else {
                (Scheme::Hog, hog()?)
            };
            let a = FeatureVector::new(left, left_scheme, params.fingerprint(left_scheme))?;
            let b = FeatureVector::new(kaze()?, Scheme::Kaze, params.fingerprint(Scheme::Kaze))?;
            single(combine(&a, &b).values)
        }
    }
}

pub fn extract_file(path: &Path, scheme: Scheme, params: &ExtractorParams) -> Result<FeatureVector> {
    extract_features(&load_image(path)?, scheme, params)
}
