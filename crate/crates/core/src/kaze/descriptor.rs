//! Orientation assignment and the 64-dimensional M-SURF descriptor.

use std::f64::consts::PI;

use super::detector::KazeKeypoint;
use super::scale_space::{Level, ScaleSpace};

pub const DESCRIPTOR_LEN: usize = 64;

const ORIENTATION_WINDOW: f64 = PI / 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: [f64; DESCRIPTOR_LEN],
    pub orientation: f64,
    /// All filter responses were zero; `values` is the zero vector.
    pub degenerate: bool,
}

#[inline]
fn gaussian(x: f64, y: f64, sigma: f64) -> f64 {
    (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
}

fn sample(raster: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |xx: usize, yy: usize| raster[yy * width + xx];
    let top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
    let bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
    top + fy * (bottom - top)
}

/// Dominant orientation: the direction of the largest summed response
/// vector over any 60° sector, using Gaussian-weighted samples on a
/// radius-6σ disc. Sectors start at the sample angles themselves, so the
/// result turns with the image.
pub fn dominant_orientation(space: &ScaleSpace, kp: &KazeKeypoint) -> f64 {
    let level: &Level = &space.levels[kp.level];
    let (w, h) = (space.width, space.height);
    let s = kp.sigma;
    let mut responses = Vec::with_capacity(113);
    for j in -6i32..=6 {
        for i in -6i32..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let weight = gaussian(i as f64, j as f64, 2.5);
            let sx = kp.x + i as f64 * s;
            let sy = kp.y + j as f64 * s;
            let rx = weight * sample(&level.lx, w, h, sx, sy);
            let ry = weight * sample(&level.ly, w, h, sx, sy);
            if rx != 0.0 || ry != 0.0 {
                responses.push((rx, ry, ry.atan2(rx).rem_euclid(2.0 * PI)));
            }
        }
    }
    let mut best = (0.0, 0.0, 0.0f64);
    for &(_, _, start) in &responses {
        let end = start + ORIENTATION_WINDOW;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(rx, ry, a) in &responses {
            let inside = if end < 2.0 * PI {
                a >= start && a < end
            } else {
                a >= start || a < end - 2.0 * PI
            };
            if inside {
                sx += rx;
                sy += ry;
            }
        }
        let norm = sx * sx + sy * sy;
        if norm > best.2 {
            best = (sx, sy, norm);
        }
    }
    if best.2 == 0.0 {
        0.0
    } else {
        best.1.atan2(best.0)
    }
}

/// Computes the M-SURF descriptor of `kp` at its detection level.
///
/// A 24σ × 24σ window, rotated to the dominant orientation, is split into
/// 4 × 4 overlapping subregions of 9 × 9 samples. Each subregion
/// contributes `(Σdx, Σdy, Σ|dx|, Σ|dy|)` of the rotated first-order
/// responses, Gaussian-weighted within and across subregions. The result is
/// L2-normalised.
pub fn describe_keypoint(space: &ScaleSpace, kp: &KazeKeypoint) -> Descriptor {
    let orientation = dominant_orientation(space, kp);
    let level = &space.levels[kp.level];
    let (w, h) = (space.width, space.height);
    let s = kp.sigma;
    let (si, co) = orientation.sin_cos();

    const STARTS: [i32; 4] = [-12, -7, -2, 3];
    let mut values = [0.0; DESCRIPTOR_LEN];
    let mut len2 = 0.0;
    let mut idx = 0;
    for (ri, &row_start) in STARTS.iter().enumerate() {
        for (ci, &col_start) in STARTS.iter().enumerate() {
            let (cx, cy) = ((col_start + 4) as f64, (row_start + 4) as f64);
            let (mut dx, mut dy, mut mdx, mut mdy) = (0.0, 0.0, 0.0, 0.0);
            for k in row_start..row_start + 9 {
                for l in col_start..col_start + 9 {
                    let (u, v) = (l as f64, k as f64);
                    let weight = gaussian(u - cx, v - cy, 2.5);
                    let px = kp.x + s * (u * co - v * si);
                    let py = kp.y + s * (u * si + v * co);
                    let rx = sample(&level.lx, w, h, px, py);
                    let ry = sample(&level.ly, w, h, px, py);
                    let along = weight * (rx * co + ry * si);
                    let across = weight * (-rx * si + ry * co);
                    dx += along;
                    dy += across;
                    mdx += along.abs();
                    mdy += across.abs();
                }
            }
            let g = gaussian(ci as f64 - 1.5, ri as f64 - 1.5, 1.5);
            let sub = [dx * g, dy * g, mdx * g, mdy * g];
            for v in sub {
                values[idx] = v;
                len2 += v * v;
                idx += 1;
            }
        }
    }
    if len2 > 0.0 && len2.is_finite() {
        let norm = len2.sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Descriptor {
            values,
            orientation,
            degenerate: false,
        }
    } else {
        Descriptor {
            values: [0.0; DESCRIPTOR_LEN],
            orientation,
            degenerate: true,
        }
    }
}
