//! Grayscale rasters and the pixel-level transforms shared by every stage.
//!
//! Intensities are kept as `f64` in `[0, 255]` so that resizing, log scaling
//! and feature extraction never re-quantize. Quantization to 8 bits happens
//! only in [`encode_pgm`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the square thumbnails the pipeline works on.
pub const WORKING_SIZE: usize = 28;

/// BT.601 luminance weights.
const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Single-channel image, row-major, intensities in `[0, 255]`.
#[derive(Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Builds an image from arbitrary reals, clamping into `[0, 255]`.
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) })
            .collect();
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Returns a copy with every pixel mapped through `f` (result clamped).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 255.0)).collect(),
        }
    }

    /// Bilinear sample at a real-valued position, clamping to the border.
    ///
    /// Written as `a + t * (b - a)` so that constant neighbourhoods
    /// reproduce their value exactly.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(x0, y0);
        let v10 = self.get(x1, y0);
        let v01 = self.get(x0, y1);
        let v11 = self.get(x1, y1);
        let top = v00 + fx * (v10 - v00);
        let bottom = v01 + fx * (v11 - v01);
        top + fy * (bottom - top)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    /// Guesses the format from a file extension (case-insensitive).
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "pnm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

/// Decodes PGM (`P2`/`P5`) or PNG bytes into a grayscale image.
///
/// Colour PNGs are reduced with BT.601 luminance weights; 16-bit samples
/// and PGM files with a max value other than 255 are rescaled to `[0, 255]`.
pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<GrayImage> {
    if bytes.is_empty() {
        return Err(Error::MalformedFile("empty input".into()));
    }
    match format {
        ImageFormat::Pgm => decode_pgm(bytes),
        ImageFormat::Png => decode_png(bytes),
    }
}

/// Reads and decodes an image file, picking the format from its extension.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let format = ImageFormat::from_path(path).ok_or_else(|| Error::UnsupportedFormat(path.display().to_string()))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes, format)
}

struct PgmTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmTokens<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedFile("PGM: expected an integer".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedFile("PGM: integer out of range".into()))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedFile("PGM: missing magic number".into()));
    }
    let binary = match bytes[1] {
        b'5' => true,
        b'2' => false,
        other => return Err(Error::UnsupportedFormat(format!("netpbm variant P{}", other as char))),
    };
    let mut tok = PgmTokens { bytes, pos: 2 };
    let width = tok.next_uint()? as usize;
    let height = tok.next_uint()? as usize;
    let maxval = tok.next_uint()?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedFile("PGM: zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedFile(format!("PGM: bad maxval {maxval}")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedFile("PGM: dimensions overflow".into()))?;
    let scale = 255.0 / maxval as f64;
    let rescale = |v: u32| -> Result<f64> {
        if v > maxval {
            return Err(Error::MalformedFile(format!("PGM: sample {v} exceeds maxval {maxval}")));
        }
        Ok(if maxval == 255 { v as f64 } else { v as f64 * scale })
    };

    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = tok.pos + 1;
        let sample_bytes = if maxval < 256 { 1 } else { 2 };
        let needed = n * sample_bytes;
        if start > bytes.len() || bytes.len() - start < needed {
            return Err(Error::MalformedFile("PGM: truncated raster".into()));
        }
        let raster = &bytes[start..start + needed];
        if sample_bytes == 1 {
            for &b in raster {
                data.push(rescale(b as u32)?);
            }
        } else {
            for pair in raster.chunks_exact(2) {
                data.push(rescale(u16::from_be_bytes([pair[0], pair[1]]) as u32)?);
            }
        }
    } else {
        for _ in 0..n {
            let v = tok
                .next_uint()
                .map_err(|_| Error::MalformedFile("PGM: truncated raster".into()))?;
            data.push(rescale(v)?);
        }
    }
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedFile(format!("PNG: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::MalformedFile("PNG: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::MalformedFile(format!("PNG: {e}")))?;
    let buf = &buf[..frame.buffer_size()];
    let (width, height) = (frame.width as usize, frame.height as usize);

    let samples: Vec<f64> = match frame.bit_depth {
        png::BitDepth::Eight => buf.iter().map(|&b| b as f64).collect(),
        png::BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 * (255.0 / 65535.0))
            .collect(),
        // EXPAND widens sub-byte depths to 8 bits
        other => return Err(Error::UnsupportedFormat(format!("PNG bit depth {other:?}"))),
    };
    let channels = frame.color_type.samples();
    if samples.len() < width * height * channels {
        return Err(Error::MalformedFile("PNG: short frame".into()));
    }
    let data: Vec<f64> = samples
        .chunks_exact(channels)
        .take(width * height)
        .map(|px| match channels {
            1 | 2 => px[0],
            _ => LUMA_R * px[0] + LUMA_G * px[1] + LUMA_B * px[2],
        })
        .collect();
    GrayImage::from_clamped(width, height, data)
}

/// Encodes as binary PGM (`P5`), rounding to the nearest 8-bit level.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

/// Writes a debug PGM dump of an arbitrary real raster, min-max stretched.
pub fn encode_pgm_stretched(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(
        values
            .iter()
            .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

/// Bilinear resize using pixel-centre alignment. Same-size requests return
/// an exact copy.
pub fn resize(img: &GrayImage, target_w: usize, target_h: usize) -> Result<GrayImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::InvalidParameter(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    if target_w == img.width && target_h == img.height {
        return Ok(img.clone());
    }
    let sx = img.width as f64 / target_w as f64;
    let sy = img.height as f64 / target_h as f64;
    let mut data = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..target_w {
            let src_x = (x as f64 + 0.5) * sx - 0.5;
            data.push(img.sample_bilinear(src_x, src_y));
        }
    }
    GrayImage::from_clamped(target_w, target_h, data)
}

/// Logarithmic intensity scaling `v -> 255 ln(1 + v) / ln(256)`.
pub fn log_transform(img: &GrayImage) -> GrayImage {
    let denom = 256f64.ln();
    img.map(|v| 255.0 * ((1.0 + v).ln() / denom))
}

/// Normalised frame difference: 0 for identical frames, 1 for black vs white.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Mean absolute pixel difference divided by 255.
pub fn frame_similarity(a: &GrayImage, b: &GrayImage) -> Result<SimilarityScore> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch {
            left_w: a.width,
            left_h: a.height,
            right_w: b.width,
            right_h: b.height,
        });
    }
    let total: f64 = a.data.iter().zip(&b.data).map(|(p, q)| (p - q).abs()).sum();
    let score = total / (a.data.len() as f64 * 255.0);
    Ok(SimilarityScore(score.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn png_bytes(color: png::ColorType, depth: png::BitDepth, w: u32, h: u32, raw: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, w, h);
            enc.set_color(color);
            enc.set_depth(depth);
            let mut writer = enc.write_header().unwrap();
            writer.write_image_data(raw).unwrap();
        }
        out
    }

    #[test]
    fn decodes_plain_and_binary_pgm() {
        let ascii = b"P2\n# comment\n2 2\n255\n0 255\n128 64\n";
        let img = decode_image(ascii, ImageFormat::Pgm).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 64.0]);

        let mut binary = b"P5\n2 2\n255\n".to_vec();
        binary.extend([0u8, 255, 128, 64]);
        let img = decode_image(&binary, ImageFormat::Pgm).unwrap();
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn pgm_maxval_is_rescaled() {
        let img = decode_image(b"P2 1 1 15 15", ImageFormat::Pgm).unwrap();
        assert_eq!(img.data(), &[255.0]);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(
            decode_image(&[], ImageFormat::Pgm),
            Err(Error::MalformedFile(_))
        ));
        assert!(matches!(
            decode_image(&[], ImageFormat::Png),
            Err(Error::MalformedFile(_))
        ));
        assert!(matches!(
            decode_image(b"P5\n4 4\n255\n\x00\x01", ImageFormat::Pgm),
            Err(Error::MalformedFile(_))
        ));
        assert!(matches!(
            decode_image(b"P6\n1 1\n255\n\x00\x00\x00", ImageFormat::Pgm),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_image(b"not a png", ImageFormat::Png),
            Err(Error::MalformedFile(_))
        ));
    }

    #[test]
    fn red_png_pixel_uses_bt601_luma() {
        let bytes = png_bytes(png::ColorType::Rgb, png::BitDepth::Eight, 1, 1, &[255, 0, 0]);
        let img = decode_image(&bytes, ImageFormat::Png).unwrap();
        // 0.299 * 255, computed by hand
        assert!((img.data()[0] - 76.245).abs() < 1e-9);
    }

    #[test]
    fn png_variants_decode() {
        let gray = png_bytes(png::ColorType::Grayscale, png::BitDepth::Eight, 2, 1, &[10, 200]);
        assert_eq!(decode_image(&gray, ImageFormat::Png).unwrap().data(), &[10.0, 200.0]);

        let ga = png_bytes(png::ColorType::GrayscaleAlpha, png::BitDepth::Eight, 1, 1, &[77, 0]);
        assert_eq!(decode_image(&ga, ImageFormat::Png).unwrap().data(), &[77.0]);

        let white16 = png_bytes(png::ColorType::Grayscale, png::BitDepth::Sixteen, 1, 1, &[255, 255]);
        assert!((decode_image(&white16, ImageFormat::Png).unwrap().data()[0] - 255.0).abs() < 1e-9);

        let rgba = png_bytes(png::ColorType::Rgba, png::BitDepth::Eight, 1, 1, &[255, 255, 255, 255]);
        assert!((decode_image(&rgba, ImageFormat::Png).unwrap().data()[0] - 255.0).abs() < 1e-9);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ImageFormat::from_path(Path::new("a/b.PNG")), Some(ImageFormat::Png));
        assert_eq!(ImageFormat::from_path(Path::new("x.pgm")), Some(ImageFormat::Pgm));
        assert_eq!(ImageFormat::from_path(Path::new("x.jpg")), None);
    }

    #[test]
    fn resize_examples() {
        let constant = GrayImage::filled(13, 7, 100.0).unwrap();
        let out = resize(&constant, 28, 28).unwrap();
        assert!(out.data().iter().all(|&v| v == 100.0));

        let ramp = GrayImage::new(2, 1, vec![0.0, 255.0]).unwrap();
        let out = resize(&ramp, 4, 1).unwrap();
        assert!(out.data().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[3], 255.0);

        assert!(resize(&ramp, 0, 3).is_err());
    }

    #[test]
    fn log_transform_examples() {
        let img = GrayImage::new(3, 1, vec![0.0, 255.0, 15.0]).unwrap();
        let out = log_transform(&img);
        assert_eq!(out.data()[0], 0.0);
        assert_eq!(out.data()[1], 255.0);
        // 255 * ln 16 / ln 256 = 127.5
        assert!((out.data()[2] - 127.5).abs() < 1e-9);
    }

    #[test]
    fn log_transform_strictly_monotone_on_integer_levels() {
        let img = GrayImage::from_fn(256, 1, |x, _| x as f64).unwrap();
        let out = log_transform(&img);
        assert!(out.data().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn similarity_examples() {
        let black = GrayImage::filled(28, 28, 0.0).unwrap();
        let white = GrayImage::filled(28, 28, 255.0).unwrap();
        let dim = GrayImage::filled(28, 28, 51.0).unwrap();
        assert_eq!(frame_similarity(&black, &black).unwrap().value(), 0.0);
        assert_eq!(frame_similarity(&black, &white).unwrap().value(), 1.0);
        assert!((frame_similarity(&black, &dim).unwrap().value() - 0.2).abs() < 1e-12);
        let small = GrayImage::filled(4, 4, 0.0).unwrap();
        assert!(matches!(
            frame_similarity(&black, &small),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(GrayImage::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::new(2, 1, vec![1.0]).is_err());
        assert!(GrayImage::new(0, 1, vec![]).is_err());
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..=255, w * h)
                .prop_map(move |px| GrayImage::new(w, h, px.into_iter().map(f64::from).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn pgm_round_trip_is_lossless(img in arb_image()) {
            let back = decode_image(&encode_pgm(&img), ImageFormat::Pgm).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn resize_to_same_size_is_identity(img in arb_image()) {
            prop_assert_eq!(resize(&img, img.width(), img.height()).unwrap(), img);
        }

        #[test]
        fn similarity_is_symmetric_and_zero_on_self(a in arb_image(), seed in 0u8..=255) {
            let b = a.map(|v| (v + seed as f64) % 256.0);
            prop_assert_eq!(frame_similarity(&a, &a).unwrap().value(), 0.0);
            prop_assert_eq!(
                frame_similarity(&a, &b).unwrap(),
                frame_similarity(&b, &a).unwrap()
            );
        }
    }
}
