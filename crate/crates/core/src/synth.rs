//! Synthetic real/fake corpus: random textures, and for each one a "fake"
//! counterpart in which a randomly placed square patch has been replaced by
//! a Gaussian-blurred copy blended back into the image.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{encode_pgm, GrayImage};
use crate::kaze::gaussian_blur;
use crate::learn::tree_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Number of real images; each has one fake counterpart.
    pub pairs: usize,
    pub size: usize,
    pub patch: usize,
    pub blur_sigma: f64,
    /// Weight of the blurred copy inside the patch.
    pub blend: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            pairs: 400,
            size: 28,
            patch: 10,
            blur_sigma: 2.0,
            blend: 1.0,
            seed: crate::DEFAULT_SEED,
        }
    }
}

fn texture(size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gratings: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(2..=4))
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let freq = rng.random_range(0.15..0.9);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = rng.random_range(5.0..20.0);
            (angle, freq, phase, amp)
        })
        .collect();
    let base = rng.random_range(80.0..170.0);
    let grain = Normal::new(0.0, rng.random_range(15.0..30.0)).expect("positive sigma");
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let mut v = base;
            for &(angle, freq, phase, amp) in &gratings {
                let t = x as f64 * angle.cos() + y as f64 * angle.sin();
                v += amp * (freq * t + phase).sin();
            }
            v += grain.sample(rng);
            out.push(v.clamp(0.0, 255.0).round());
        }
    }
    out
}

/// Real image `index` and its fake counterpart.
pub fn generate_pair(spec: &SynthSpec, index: usize) -> Result<(GrayImage, GrayImage)> {
    if spec.patch == 0 || spec.patch > spec.size {
        return Err(Error::InvalidParameter(format!(
            "patch side {} must lie in 1..={}",
            spec.patch, spec.size
        )));
    }
    let mut rng = tree_rng(spec.seed, index);
    let n = spec.size;
    let real = texture(n, &mut rng);
    let blurred = gaussian_blur(&real, n, n, spec.blur_sigma);
    let px = rng.random_range(0..=n - spec.patch);
    let py = rng.random_range(0..=n - spec.patch);
    let mut fake = real.clone();
    for y in py..py + spec.patch {
        for x in px..px + spec.patch {
            let i = y * n + x;
            fake[i] = (spec.blend * blurred[i] + (1.0 - spec.blend) * real[i]).round();
        }
    }
    Ok((GrayImage::new(n, n, real)?, GrayImage::new(n, n, fake)?))
}

/// Writes `<root>/real/NNNN.pgm` and `<root>/fake/NNNN.pgm`.
pub fn write_corpus(root: &Path, spec: &SynthSpec) -> Result<()> {
    let dirs = [root.join("real"), root.join("fake")];
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for i in 0..spec.pairs {
        let (real, fake) = generate_pair(spec, i)?;
        let name = format!("{i:04}.pgm");
        for (dir, img) in dirs.iter().zip([&real, &fake]) {
            let path = dir.join(&name);
            fs::write(&path, encode_pgm(img)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fakes_differ_only_inside_the_patch() {
        let spec = SynthSpec::default();
        let (real, fake) = generate_pair(&spec, 3).unwrap();
        let changed: Vec<usize> = (0..real.data().len())
            .filter(|&i| real.data()[i] != fake.data()[i])
            .collect();
        assert!(!changed.is_empty());
        let xs: Vec<usize> = changed.iter().map(|i| i % 28).collect();
        let ys: Vec<usize> = changed.iter().map(|i| i / 28).collect();
        let span = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
        assert!(span(&xs) < 10 && span(&ys) < 10);
        assert_eq!(generate_pair(&spec, 3).unwrap(), (real, fake));
    }
}
