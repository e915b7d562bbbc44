//! Local binary patterns over a circular neighbourhood, with banded,
//! normalised histograms.
//!
//! Neighbour `p` sits at angle `2πp/P`, measured from east and turning
//! towards +y (down the image). Bit `p` of the code is set when the
//! bilinearly sampled neighbour is `>=` the centre, so flat regions produce
//! all-ones codes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Largest neighbour count whose full (non-uniform) histogram we allow.
pub const MAX_FULL_HISTOGRAM_NEIGHBORS: u32 = 16;
pub const MAX_NEIGHBORS: u32 = 31;

/// Offsets closer than this to an integer are snapped onto it, so that
/// axis-aligned neighbours read exact pixels.
const SNAP_EPS: f64 = 1e-9;

/// Interpolated differences this close to zero are ties (bit set). Exact
/// ties such as `a·g² − 2a·f² + d·fg − d·gf = 0` do not survive rounding.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbpParams {
    pub neighbors: u32,
    pub radius: f64,
    pub uniform: bool,
    /// The image is split into `bands × bands` regions, one histogram each.
    pub bands: usize,
    pub epsilon: f64,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams::preset(LbpPreset::P12R2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbpPreset {
    /// P = 12, R = 2.
    P12R2,
    /// P = 24, R = 3.
    P24R3,
}

impl std::str::FromStr for LbpPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p12-r2" => Ok(LbpPreset::P12R2),
            "p24-r3" => Ok(LbpPreset::P24R3),
            other => Err(Error::InvalidParameter(format!("unknown LBP preset `{other}`"))),
        }
    }
}

impl LbpParams {
    pub fn preset(preset: LbpPreset) -> Self {
        let (neighbors, radius) = match preset {
            LbpPreset::P12R2 => (12, 2.0),
            LbpPreset::P24R3 => (24, 3.0),
        };
        LbpParams {
            neighbors,
            radius,
            uniform: true,
            bands: 2,
            epsilon: 1e-7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=MAX_NEIGHBORS).contains(&self.neighbors) {
            return Err(Error::InvalidParameter(format!(
                "LBP neighbour count must lie in [4, {MAX_NEIGHBORS}], got {}",
                self.neighbors
            )));
        }
        if !self.uniform && self.neighbors > MAX_FULL_HISTOGRAM_NEIGHBORS {
            return Err(Error::InvalidParameter(format!(
                "full LBP histograms need P <= {MAX_FULL_HISTOGRAM_NEIGHBORS}; enable uniform mode for P = {}",
                self.neighbors
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "LBP radius must be > 0, got {}",
                self.radius
            )));
        }
        if self.bands == 0 {
            return Err(Error::InvalidParameter("LBP band count must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("LBP epsilon must be > 0".into()));
        }
        Ok(())
    }

    /// Pixels this close to a border have no code.
    pub fn margin(&self) -> usize {
        self.radius.ceil() as usize
    }

    pub fn bin_count(&self) -> usize {
        if self.uniform {
            uniform_bin_count(self.neighbors)
        } else {
            1usize << self.neighbors
        }
    }

    pub fn histogram_len(&self) -> usize {
        self.bin_count() * self.bands * self.bands
    }

    /// Neighbour offsets `(dx, dy)` in bit order.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let p = self.neighbors as f64;
        (0..self.neighbors)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / p;
                (snap(self.radius * angle.cos()), snap(self.radius * angle.sin()))
            })
            .collect()
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Interpolated `neighbour - centre` at an in-bounds offset.
///
/// Differences are taken before interpolating, so adding a constant to the
/// image cannot move a comparison across zero.
#[inline]
fn neighbor_delta(img: &GrayImage, x: usize, y: usize, dx: f64, dy: f64, center: f64) -> f64 {
    let sx = x as f64 + dx;
    let sy = y as f64 + dy;
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let d00 = img.get(x0, y0) - center;
    let d10 = img.get(x1, y0) - center;
    let d01 = img.get(x0, y1) - center;
    let d11 = img.get(x1, y1) - center;
    let (gx, gy) = (1.0 - fx, 1.0 - fy);
    d00 * gx * gy + d10 * fx * gy + d01 * gx * fy + d11 * fx * fy
}

fn code_with_offsets(img: &GrayImage, x: usize, y: usize, offsets: &[(f64, f64)]) -> u32 {
    let center = img.get(x, y);
    offsets.iter().enumerate().fold(0u32, |code, (bit, &(dx, dy))| {
        if neighbor_delta(img, x, y, dx, dy, center) >= -TIE_EPS {
            code | (1 << bit)
        } else {
            code
        }
    })
}

/// LBP code of one pixel.
pub fn lbp_code(img: &GrayImage, x: usize, y: usize, params: &LbpParams) -> Result<u32> {
    params.validate()?;
    let m = params.margin();
    if x < m || y < m || x + m >= img.width() || y + m >= img.height() {
        return Err(Error::OutOfBounds { x, y });
    }
    Ok(code_with_offsets(img, x, y, &params.offsets()))
}

/// Per-pixel codes; entries within `margin` of a border are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpCodeMap {
    pub width: usize,
    pub height: usize,
    pub margin: usize,
    codes: Vec<u32>,
}

impl LbpCodeMap {
    pub fn get(&self, x: usize, y: usize) -> Option<u32> {
        let m = self.margin;
        if x < m || y < m || x + m >= self.width || y + m >= self.height {
            None
        } else {
            Some(self.codes[y * self.width + x])
        }
    }

    /// Raw codes as a raster for debug dumps (border entries are zero).
    pub fn as_raster(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| c as f64).collect()
    }
}

pub fn lbp_code_map(img: &GrayImage, params: &LbpParams) -> Result<LbpCodeMap> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let m = params.margin();
    let offsets = params.offsets();
    let mut codes = vec![0u32; w * h];
    if w > 2 * m && h > 2 * m {
        for y in m..h - m {
            for x in m..w - m {
                codes[y * w + x] = code_with_offsets(img, x, y, &offsets);
            }
        }
    }
    Ok(LbpCodeMap {
        width: w,
        height: h,
        margin: m,
        codes,
    })
}

pub fn uniform_bin_count(neighbors: u32) -> usize {
    let p = neighbors as usize;
    p * (p - 1) + 3
}

/// Number of 0/1 changes around the circular `neighbors`-bit string.
pub fn circular_transitions(code: u32, neighbors: u32) -> u32 {
    let mask = if neighbors == 32 {
        u32::MAX
    } else {
        (1u32 << neighbors) - 1
    };
    let code = code & mask;
    let rotated = ((code >> 1) | ((code & 1) << (neighbors - 1))) & mask;
    (code ^ rotated).count_ones()
}

/// Maps a code to its uniform-pattern bin.
///
/// Layout: bin 0 is all zeros; patterns with `k` ones (`1 <= k < P`) whose
/// run of ones starts at bit `r` occupy bin `1 + (k - 1) P + r`; all ones is
/// bin `P(P - 1) + 1`; every non-uniform code shares the last bin.
pub fn uniform_bin(code: u32, neighbors: u32) -> usize {
    let p = neighbors as usize;
    let ones = code.count_ones() as usize;
    if circular_transitions(code, neighbors) > 2 {
        return p * (p - 1) + 2;
    }
    if ones == 0 {
        return 0;
    }
    if ones == p {
        return p * (p - 1) + 1;
    }
    // start of the run: a set bit whose predecessor (circularly) is clear
    let start = (0..p)
        .find(|&r| code >> r & 1 == 1 && code >> ((r + p - 1) % p) & 1 == 0)
        .expect("uniform pattern with 0 < ones < P has a run start");
    1 + (ones - 1) * p + start
}

/// Concatenated per-band histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    pub bins: Vec<f64>,
    pub bin_count: usize,
    pub bands: usize,
    /// Valid (coded) pixel count per band, row-major.
    pub band_counts: Vec<usize>,
}

impl LbpHistogram {
    pub fn band(&self, index: usize) -> &[f64] {
        &self.bins[index * self.bin_count..(index + 1) * self.bin_count]
    }
}

/// Band `i` of `n` over `len` pixels; the last band absorbs the remainder.
fn band_range(i: usize, n: usize, len: usize) -> (usize, usize) {
    let size = len / n;
    let start = i * size;
    let end = if i + 1 == n { len } else { start + size };
    (start, end)
}

pub fn lbp_histogram(img: &GrayImage, params: &LbpParams) -> Result<LbpHistogram> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let b = params.bands;
    if w / b == 0 || h / b == 0 {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} image cannot be split into {b}x{b} bands"
        )));
    }
    let map = lbp_code_map(img, params)?;
    let bin_count = params.bin_count();
    let mut bins = vec![0.0; bin_count * b * b];
    let mut band_counts = Vec::with_capacity(b * b);

    for by in 0..b {
        let (y0, y1) = band_range(by, b, h);
        for bx in 0..b {
            let (x0, x1) = band_range(bx, b, w);
            let hist = &mut bins[(by * b + bx) * bin_count..(by * b + bx + 1) * bin_count];
            let mut count = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    if let Some(code) = map.get(x, y) {
                        let bin = if params.uniform {
                            uniform_bin(code, params.neighbors)
                        } else {
                            code as usize
                        };
                        hist[bin] += 1.0;
                        count += 1;
                    }
                }
            }
            if count == 0 {
                return Err(Error::ImageTooSmall(format!(
                    "band ({bx}, {by}) of a {w}x{h} image has no pixels at least {} from the border",
                    params.margin()
                )));
            }
            let denom = count as f64 + params.epsilon;
            hist.iter_mut().for_each(|v| *v /= denom);
            band_counts.push(count);
        }
    }
    Ok(LbpHistogram {
        bins,
        bin_count,
        bands: b,
        band_counts,
    })
}
