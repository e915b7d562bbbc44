//! Nonlinear (Perona–Malik) scale space integrated with additive operator
//! splitting.
//!
//! Internally every level holds `(I - min I) / 255`. Subtracting the image
//! minimum makes the whole pipeline exactly invariant to a constant
//! brightness offset on integer-valued inputs; [`ScaleSpace::level_image`]
//! maps levels back to input units.

use crate::image::GrayImage;

use super::KazeParams;

/// Images smaller than this on either side get a single, detection-free level.
pub const MIN_DETECTION_SIZE: usize = 16;

/// Width of the Gaussian derivative filter relative to the level's sigma.
const DERIVATIVE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Derivative rasters of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub octave: usize,
    pub sublevel: usize,
    pub sigma: f64,
    /// Evolution time `sigma² / 2`.
    pub time: f64,
    pub image: Vec<f64>,
    pub lx: Vec<f64>,
    pub ly: Vec<f64>,
    /// Scale-normalised Hessian determinant `sigma⁴ (Lxx Lyy - Lxy²)`.
    pub det: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpace {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<Level>,
    /// Contrast factor `k` used by the conductivity function.
    pub contrast: f64,
    pub sublevels: usize,
    pub base_sigma: f64,
    offset: f64,
}

impl ScaleSpace {
    /// Level `i` converted back to input intensity units (unclamped).
    pub fn level_values(&self, i: usize) -> Vec<f64> {
        self.levels[i].image.iter().map(|v| v * 255.0 + self.offset).collect()
    }

    pub fn level_mean(&self, i: usize) -> f64 {
        let v = self.level_values(i);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Level `i` as an image, for debug dumps.
    pub fn level_image(&self, i: usize) -> GrayImage {
        GrayImage::from_clamped(self.width, self.height, self.level_values(i))
            .expect("level has the scale space's dimensions")
    }

    pub fn sigma_at(&self, level: f64) -> f64 {
        self.base_sigma * (level / self.sublevels as f64).exp2()
    }
}

/// Index into `[0, n)` by half-sample symmetric reflection, folding as often
/// as needed.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with symmetric borders, which preserves the
/// image sum.
pub fn gaussian_blur(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * row[reflect(x as isize + k as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(y as isize + k as isize - r, height) * width + x])
                .sum();
        }
    }
    out
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Central first derivatives with replicated borders.
pub fn first_derivatives(src: &[f64], width: usize, height: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |x: isize, y: isize| src[clamp_idx(y, height) * width + clamp_idx(x, width)];
    let mut lx = Vec::with_capacity(src.len());
    let mut ly = Vec::with_capacity(src.len());
    for y in 0..height as isize {
        for x in 0..width as isize {
            lx.push(0.5 * (at(x + 1, y) - at(x - 1, y)));
            ly.push(0.5 * (at(x, y + 1) - at(x, y - 1)));
        }
    }
    (lx, ly)
}

/// `sigma⁴ (Lxx Lyy - Lxy²)` with unit-step central differences.
fn hessian_response(src: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let at = |x: isize, y: isize| src[clamp_idx(y, height) * width + clamp_idx(x, width)];
    let norm = sigma.powi(4);
    let mut det = Vec::with_capacity(src.len());
    for y in 0..height as isize {
        for x in 0..width as isize {
            let c = at(x, y);
            let lxx = at(x + 1, y) - 2.0 * c + at(x - 1, y);
            let lyy = at(x, y + 1) - 2.0 * c + at(x, y - 1);
            let lxy = 0.25 * (at(x + 1, y + 1) - at(x + 1, y - 1) - at(x - 1, y + 1) + at(x - 1, y - 1));
            det.push(norm * (lxx * lyy - lxy * lxy));
        }
    }
    det
}

/// Percentile of the non-zero gradient magnitudes of `src` after a unit
/// Gaussian blur. Falls back to 1 when the image is flat.
pub fn contrast_factor(src: &[f64], width: usize, height: usize, percentile: f64) -> f64 {
    let smooth = gaussian_blur(src, width, height, 1.0);
    let (lx, ly) = first_derivatives(&smooth, width, height);
    let mut mags: Vec<f64> = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| a.hypot(*b))
        .filter(|&m| m > 0.0)
        .collect();
    if mags.is_empty() {
        return 1.0;
    }
    mags.sort_by(f64::total_cmp);
    let idx = ((percentile * mags.len() as f64).ceil() as usize).clamp(1, mags.len()) - 1;
    let k = mags[idx];
    if k > 0.0 {
        k
    } else {
        1.0
    }
}

/// Perona–Malik g2 conductivity `1 / (1 + |∇L|² / k²)`, gradients taken on
/// a unit-Gaussian-smoothed copy.
fn conductivity(src: &[f64], width: usize, height: usize, k: f64) -> Vec<f64> {
    let smooth = gaussian_blur(src, width, height, 1.0);
    let (lx, ly) = first_derivatives(&smooth, width, height);
    let inv_k2 = 1.0 / (k * k);
    lx.iter()
        .zip(&ly)
        .map(|(a, b)| 1.0 / (1.0 + (a * a + b * b) * inv_k2))
        .collect()
}

/// Solves `(I - step A) u = d` along one line where `A` is the 1-D
/// diffusion operator with half-point conductivities and no-flux ends.
fn solve_line(g: &[f64], d: &[f64], step: f64, out: &mut [f64], c: &mut [f64], dp: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        out[0] = d[0];
        return;
    }
    // coupling between i and i+1
    let couple = |i: usize| 0.5 * (g[i] + g[i + 1]) * step;
    // Thomas algorithm; lower = upper = -couple
    let mut upper_prev = 0.0;
    for i in 0..n {
        let left = if i > 0 { couple(i - 1) } else { 0.0 };
        let right = if i + 1 < n { couple(i) } else { 0.0 };
        let diag = 1.0 + left + right;
        let lower = -left;
        let upper = -right;
        let denom = diag - lower * upper_prev;
        c[i] = upper / denom;
        dp[i] = (d[i] - lower * if i > 0 { dp[i - 1] } else { 0.0 }) / denom;
        upper_prev = c[i];
    }
    out[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = dp[i] - c[i] * out[i + 1];
    }
}

/// One semi-implicit AOS step of length `tau`.
pub fn aos_step(src: &[f64], g: &[f64], width: usize, height: usize, tau: f64) -> Vec<f64> {
    // two directions, each solved with a 2·tau implicit step
    let step = 2.0 * tau;
    let mut rows = vec![0.0; src.len()];
    let n = width.max(height);
    let (mut c, mut dp) = (vec![0.0; n], vec![0.0; n]);
    for y in 0..height {
        let r = y * width..(y + 1) * width;
        solve_line(&g[r.clone()], &src[r.clone()], step, &mut rows[r], &mut c, &mut dp);
    }
    let mut cols = vec![0.0; src.len()];
    let (mut gl, mut dl, mut ol) = (vec![0.0; height], vec![0.0; height], vec![0.0; height]);
    for x in 0..width {
        for y in 0..height {
            gl[y] = g[y * width + x];
            dl[y] = src[y * width + x];
        }
        solve_line(&gl, &dl, step, &mut ol, &mut c, &mut dp);
        for y in 0..height {
            cols[y * width + x] = ol[y];
        }
    }
    rows.iter().zip(&cols).map(|(a, b)| 0.5 * (a + b)).collect()
}

fn make_level(image: Vec<f64>, width: usize, height: usize, octave: usize, sublevel: usize, sigma: f64) -> Level {
    // derivative filters widen with the level so responses are measured at
    // the level's own scale even where the diffusion has stalled
    let smooth = gaussian_blur(&image, width, height, sigma * DERIVATIVE_SCALE);
    let (lx, ly) = first_derivatives(&smooth, width, height);
    let det = hessian_response(&smooth, width, height, sigma);
    Level {
        octave,
        sublevel,
        sigma,
        time: 0.5 * sigma * sigma,
        image,
        lx,
        ly,
        det,
    }
}

pub fn build_scale_space(img: &GrayImage, params: &KazeParams) -> ScaleSpace {
    let (w, h) = (img.width(), img.height());
    let offset = img.data().iter().copied().fold(f64::INFINITY, f64::min);
    let base: Vec<f64> = img.data().iter().map(|v| (v - offset) / 255.0).collect();
    let l0 = gaussian_blur(&base, w, h, params.base_sigma);
    let contrast = params
        .contrast_k
        .unwrap_or_else(|| contrast_factor(&l0, w, h, params.contrast_percentile));

    let mut space = ScaleSpace {
        width: w,
        height: h,
        levels: Vec::new(),
        contrast,
        sublevels: params.sublevels,
        base_sigma: params.base_sigma,
        offset,
    };
    space.levels.push(make_level(l0, w, h, 0, 0, params.base_sigma));
    if w.min(h) < MIN_DETECTION_SIZE {
        return space;
    }

    for o in 0..params.octaves {
        for s in 0..params.sublevels {
            if o == 0 && s == 0 {
                continue;
            }
            let sigma = params.base_sigma * (o as f64 + s as f64 / params.sublevels as f64).exp2();
            let prev = space.levels.last().expect("level 0 exists");
            let tau = 0.5 * sigma * sigma - prev.time;
            let g = conductivity(&prev.image, w, h, contrast);
            let next = aos_step(&prev.image, &g, w, h, tau);
            space.levels.push(make_level(next, w, h, o, s, sigma));
        }
    }
    space
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_folds() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(12, 5), 2);
        assert_eq!(reflect(-13, 3), 0);
    }

    #[test]
    fn blur_preserves_sum_even_with_wide_kernels() {
        let src: Vec<f64> = (0..35).map(|i| ((i * 37) % 11) as f64).collect();
        for sigma in [0.5, 1.6, 4.0, 9.0] {
            let out = gaussian_blur(&src, 7, 5, sigma);
            let (a, b): (f64, f64) = (src.iter().sum(), out.iter().sum());
            assert!((a - b).abs() < 1e-9 * a, "sigma {sigma}");
        }
    }

    #[test]
    fn aos_step_conserves_mass() {
        let src: Vec<f64> = (0..64).map(|i| ((i * 13) % 7) as f64 / 7.0).collect();
        let g: Vec<f64> = (0..64).map(|i| 0.1 + ((i * 5) % 9) as f64 / 10.0).collect();
        let out = aos_step(&src, &g, 8, 8, 3.0);
        let (a, b): (f64, f64) = (src.iter().sum(), out.iter().sum());
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn contrast_of_flat_image_falls_back() {
        assert_eq!(contrast_factor(&[0.3; 400], 20, 20, 0.7), 1.0);
    }
}
