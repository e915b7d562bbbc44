//! Scale-space extrema of the normalised Hessian determinant.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::scale_space::ScaleSpace;
use super::KazeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KazeKeypoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub response: f64,
    /// Dominant orientation in radians; zero until described.
    pub orientation: f64,
    /// Index of the level the keypoint was found on.
    pub level: usize,
}

/// Response descending, then `y` ascending, then `x` ascending.
pub fn keypoint_order(a: &KazeKeypoint, b: &KazeKeypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
}

/// Solves a 3x3 system by Cramer's rule; `None` when singular.
fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *slot = det(&mc) / d;
    }
    Some(out)
}

/// Strict 3x3x3 maxima above `detector_threshold`, refined by a quadratic
/// fit in (x, y, level). Candidates whose refinement moves more than one
/// unit along any axis are dropped.
pub fn detect_keypoints(space: &ScaleSpace, params: &KazeParams) -> Vec<KazeKeypoint> {
    let (w, h) = (space.width, space.height);
    let mut out = Vec::new();
    if space.levels.len() < 3 {
        return out;
    }
    for li in 1..space.levels.len() - 1 {
        let level = &space.levels[li];
        let margin = (level.sigma.ceil() as usize).max(1);
        if w <= 2 * margin || h <= 2 * margin {
            continue;
        }
        let below = &space.levels[li - 1].det;
        let here = &level.det;
        let above = &space.levels[li + 1].det;
        for y in margin..h - margin {
            for x in margin..w - margin {
                let v = here[y * w + x];
                if v <= params.detector_threshold {
                    continue;
                }
                let mut is_max = true;
                'scan: for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                        if below[j] >= v || above[j] >= v || ((dx, dy) != (0, 0) && here[j] >= v) {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                let at =
                    |d: &[f64], dx: isize, dy: isize| d[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                let gx = 0.5 * (at(here, 1, 0) - at(here, -1, 0));
                let gy = 0.5 * (at(here, 0, 1) - at(here, 0, -1));
                let gs = 0.5 * (at(above, 0, 0) - at(below, 0, 0));
                let dxx = at(here, 1, 0) - 2.0 * v + at(here, -1, 0);
                let dyy = at(here, 0, 1) - 2.0 * v + at(here, 0, -1);
                let dss = at(above, 0, 0) - 2.0 * v + at(below, 0, 0);
                let dxy = 0.25 * (at(here, 1, 1) - at(here, 1, -1) - at(here, -1, 1) + at(here, -1, -1));
                let dxs = 0.25 * (at(above, 1, 0) - at(above, -1, 0) - at(below, 1, 0) + at(below, -1, 0));
                let dys = 0.25 * (at(above, 0, 1) - at(above, 0, -1) - at(below, 0, 1) + at(below, 0, -1));
                let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
                let delta = solve3(hess, [-gx, -gy, -gs]).unwrap_or([0.0; 3]);
                if delta.iter().any(|d| d.abs() > 1.0) {
                    continue;
                }
                let kx = x as f64 + delta[0];
                let ky = y as f64 + delta[1];
                if kx < 0.0 || ky < 0.0 || kx > (w - 1) as f64 || ky > (h - 1) as f64 {
                    continue;
                }
                out.push(KazeKeypoint {
                    x: kx,
                    y: ky,
                    sigma: space.sigma_at(li as f64 + delta[2]),
                    response: v,
                    orientation: 0.0,
                    level: li,
                });
            }
        }
    }
    out.sort_by(keypoint_order);
    out
}
