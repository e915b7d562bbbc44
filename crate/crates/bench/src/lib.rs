//! Shared fixtures for the criterion benches.

use kazefuse::fuse::{extract_features, Dataset, ExtractorParams, Scheme};
use kazefuse::image::GrayImage;
use kazefuse::synth::{generate_pair, SynthSpec};
use kazefuse::Result;

/// `pairs` synthetic real/fake images, interleaved real first.
pub fn synthetic_images(pairs: usize) -> Result<Vec<(GrayImage, u8)>> {
    let spec = SynthSpec::default();
    let mut out = Vec::with_capacity(2 * pairs);
    for i in 0..pairs {
        let (real, fake) = generate_pair(&spec, i)?;
        out.push((real, 0));
        out.push((fake, 1));
    }
    Ok(out)
}

/// Features of `pairs` synthetic pairs under default extractor settings.
pub fn synthetic_dataset(scheme: Scheme, pairs: usize) -> Result<Dataset> {
    let params = ExtractorParams::default();
    let mut x = Vec::new();
    let (mut y, mut sources) = (Vec::new(), Vec::new());
    for (i, (img, label)) in synthetic_images(pairs)?.into_iter().enumerate() {
        x.extend_from_slice(extract_features(&img, scheme, &params)?.values());
        y.push(label);
        sources.push(format!("synth/{i:04}"));
    }
    Dataset::new(
        x,
        params.feature_len(scheme),
        y,
        sources,
        scheme,
        params.fingerprint(scheme),
    )
}
