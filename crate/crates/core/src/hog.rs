//! Histogram of oriented gradients.
//!
//! Gradients are plain central differences `I(x+1) - I(x-1)` (no halving);
//! a Sobel variant is available for comparison. Orientations are unsigned,
//! and each pixel splits its magnitude between the two nearest orientation
//! bin centres. Cells tile the image from the top-left corner and any
//! remainder rows/columns are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientOperator {
    CentralDifference,
    Sobel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogParams {
    pub cell_size: usize,
    /// Block edge length in cells.
    pub block_size: usize,
    pub bin_count: usize,
    /// Block stride in cells.
    pub block_stride: usize,
    pub epsilon: f64,
    /// Fold orientations into [0°, 180°) when true, else use [0°, 360°).
    pub unsigned: bool,
    pub gradient: GradientOperator,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell_size: 8,
            block_size: 2,
            bin_count: 9,
            block_stride: 1,
            epsilon: 1e-7,
            unsigned: true,
            gradient: GradientOperator::CentralDifference,
        }
    }
}

impl HogParams {
    /// 18 signed bins over [0°, 360°).
    pub fn signed_preset() -> Self {
        HogParams {
            bin_count: 18,
            unsigned: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::InvalidParameter("HOG cell size must be >= 2".into()));
        }
        if self.block_size < 1 {
            return Err(Error::InvalidParameter("HOG block size must be >= 1".into()));
        }
        if self.bin_count < 2 {
            return Err(Error::InvalidParameter("HOG needs at least 2 bins".into()));
        }
        if self.block_stride < 1 || self.block_stride > self.block_size {
            return Err(Error::InvalidParameter(format!(
                "HOG block stride must lie in [1, {}], got {}",
                self.block_size, self.block_stride
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("HOG epsilon must be > 0".into()));
        }
        Ok(())
    }

    fn span_degrees(&self) -> f64 {
        if self.unsigned {
            180.0
        } else {
            360.0
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.span_degrees() / self.bin_count as f64
    }

    /// `(cells_x, cells_y)` for an image of the given size.
    pub fn cell_grid(&self, width: usize, height: usize) -> (usize, usize) {
        (width / self.cell_size, height / self.cell_size)
    }

    /// `(blocks_x, blocks_y)`, zero when not even one block fits.
    pub fn block_grid(&self, width: usize, height: usize) -> (usize, usize) {
        let (cx, cy) = self.cell_grid(width, height);
        let fit = |cells: usize| {
            if cells < self.block_size {
                0
            } else {
                (cells - self.block_size) / self.block_stride + 1
            }
        };
        (fit(cx), fit(cy))
    }

    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let (bx, by) = self.block_grid(width, height);
        bx * by * self.block_size * self.block_size * self.bin_count
    }
}

/// Per-pixel gradient components, magnitude and orientation in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

/// Central differences in the interior, doubled one-sided differences at
/// the border so both share the same scale.
fn central_axis(img: &GrayImage, x: usize, y: usize, dx: bool) -> f64 {
    let (len, pos) = if dx { (img.width(), x) } else { (img.height(), y) };
    let at = |p: usize| if dx { img.get(p, y) } else { img.get(x, p) };
    if pos == 0 {
        2.0 * (at(1) - at(0))
    } else if pos == len - 1 {
        2.0 * (at(len - 1) - at(len - 2))
    } else {
        at(pos + 1) - at(pos - 1)
    }
}

fn sobel(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let px = |dx: isize, dy: isize| {
        let xx = (x as isize + dx).clamp(0, w - 1) as usize;
        let yy = (y as isize + dy).clamp(0, h - 1) as usize;
        img.get(xx, yy)
    };
    let gx = (px(1, -1) + 2.0 * px(1, 0) + px(1, 1)) - (px(-1, -1) + 2.0 * px(-1, 0) + px(-1, 1));
    let gy = (px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)) - (px(-1, -1) + 2.0 * px(0, -1) + px(1, -1));
    (gx, gy)
}

pub fn compute_gradients(img: &GrayImage, params: &HogParams) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall(format!(
            "gradients need at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let span = params.span_degrees();
    let n = w * h;
    let mut field = GradientField {
        width: w,
        height: h,
        gx: Vec::with_capacity(n),
        gy: Vec::with_capacity(n),
        magnitude: Vec::with_capacity(n),
        orientation: Vec::with_capacity(n),
    };
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = match params.gradient {
                GradientOperator::CentralDifference => (central_axis(img, x, y, true), central_axis(img, x, y, false)),
                GradientOperator::Sobel => sobel(img, x, y),
            };
            let mag = gx.hypot(gy);
            let theta = if mag == 0.0 {
                0.0
            } else {
                let t = gy.atan2(gx).to_degrees().rem_euclid(span);
                // rem_euclid can round up to the span itself
                if t >= span {
                    0.0
                } else {
                    t
                }
            };
            field.gx.push(gx);
            field.gy.push(gy);
            field.magnitude.push(mag);
            field.orientation.push(theta);
        }
    }
    Ok(field)
}

/// Splits `magnitude` between the two bins whose centres bracket `theta`.
#[inline]
pub fn vote(hist: &mut [f64], theta: f64, magnitude: f64, bin_width: f64) {
    let n = hist.len();
    let pos = theta / bin_width - 0.5;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = (lo as isize).rem_euclid(n as isize) as usize;
    let hi = (lo + 1) % n;
    hist[lo] += magnitude * (1.0 - frac);
    hist[hi] += magnitude * frac;
}

/// Orientation histograms for every full cell, row-major, `bin_count` each.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistograms {
    pub cells_x: usize,
    pub cells_y: usize,
    pub bin_count: usize,
    pub values: Vec<f64>,
}

impl CellHistograms {
    pub fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let start = (cy * self.cells_x + cx) * self.bin_count;
        &self.values[start..start + self.bin_count]
    }
}

pub fn cell_histograms(field: &GradientField, params: &HogParams) -> Result<CellHistograms> {
    params.validate()?;
    let (cells_x, cells_y) = params.cell_grid(field.width, field.height);
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} image holds no full {}px cell",
            field.width, field.height, params.cell_size
        )));
    }
    let nb = params.bin_count;
    let bw = params.bin_width();
    let cs = params.cell_size;
    let mut values = vec![0.0; cells_x * cells_y * nb];
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let hist = &mut values[(cy * cells_x + cx) * nb..(cy * cells_x + cx + 1) * nb];
            for y in cy * cs..(cy + 1) * cs {
                for x in cx * cs..(cx + 1) * cs {
                    let i = y * field.width + x;
                    let m = field.magnitude[i];
                    if m > 0.0 {
                        vote(hist, field.orientation[i], m, bw);
                    }
                }
            }
        }
    }
    Ok(CellHistograms {
        cells_x,
        cells_y,
        bin_count: nb,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub vector: Vec<f64>,
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Length of one block's slice of `vector`.
    pub block_len: usize,
}

impl HogDescriptor {
    pub fn block(&self, index: usize) -> &[f64] {
        &self.vector[index * self.block_len..(index + 1) * self.block_len]
    }
}

/// Normalises `v / sqrt(|v|² + ε)` per block and concatenates blocks
/// row-major.
pub fn normalize_blocks(cells: &CellHistograms, params: &HogParams) -> Result<HogDescriptor> {
    let bs = params.block_size;
    let fit = |n: usize| if n < bs { 0 } else { (n - bs) / params.block_stride + 1 };
    let (blocks_x, blocks_y) = (fit(cells.cells_x), fit(cells.cells_y));
    if blocks_x == 0 || blocks_y == 0 {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} cells hold no {bs}x{bs} block",
            cells.cells_x, cells.cells_y
        )));
    }
    let block_len = bs * bs * cells.bin_count;
    let mut vector = Vec::with_capacity(blocks_x * blocks_y * block_len);
    let mut block = Vec::with_capacity(block_len);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for cy in 0..bs {
                for cx in 0..bs {
                    block.extend_from_slice(cells.cell(bx * params.block_stride + cx, by * params.block_stride + cy));
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + params.epsilon).sqrt();
            vector.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(HogDescriptor {
        vector,
        blocks_x,
        blocks_y,
        block_len,
    })
}

pub fn hog_descriptor(img: &GrayImage, params: &HogParams) -> Result<HogDescriptor> {
    params.validate()?;
    let field = compute_gradients(img, params)?;
    let cells = cell_histograms(&field, params)?;
    normalize_blocks(&cells, params)
}
