//! Soft-margin support vector classifier trained by SMO with second-order
//! working-set selection.
//!
//! Labels map to `y = -1` (real) and `y = +1` (fake). The dual is
//! `min ½ αᵀQα − eᵀα` subject to `0 ≤ α ≤ C`, `yᵀα = 0`, with
//! `Q_ij = y_i y_j K(x_i, x_j)`.

use serde::{Deserialize, Serialize};

use super::tree::Matrix;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
/// Above this many rows the kernel matrix is not cached.
const FULL_CACHE_ROWS: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvcParams {
    pub kernel: Kernel,
    pub c: f64,
    /// RBF width; `None` picks `1 / (d · mean per-feature variance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iter: u64,
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams {
            kernel: Kernel::Rbf,
            c: 1.0,
            gamma: None,
            tolerance: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("SVC C must be > 0".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter("SVC gamma must be > 0".into()));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("SVC tolerance must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("SVC iteration cap must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svc {
    pub kernel: Kernel,
    pub gamma: f64,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    pub dims: usize,
    /// `α_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    /// False when the iteration cap stopped SMO before the KKT gap closed.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn kernel_value(kernel: Kernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => dot(a, b),
        Kernel::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// `1 / (d · mean_j Var(x_j))`, or 1 when every feature is constant.
pub fn default_gamma(x: Matrix<'_>) -> f64 {
    let n = x.rows() as f64;
    let d = x.cols;
    let mut var_sum = 0.0;
    for j in 0..d {
        let mean = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
        var_sum += (0..x.rows()).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = var_sum / d as f64;
    if mean_var > 0.0 && mean_var.is_finite() {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0
    }
}

impl Svc {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut s = self.bias;
        for (k, sv) in self.support.chunks(self.dims).enumerate() {
            s += self.coef[k] * kernel_value(self.kernel, self.gamma, sv, x);
        }
        s
    }

    /// Positive decision values are fake; zero goes to real.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

struct KernelRows<'a> {
    x: Matrix<'a>,
    kernel: Kernel,
    gamma: f64,
    full: Option<Vec<f64>>,
    diag: Vec<f64>,
}

impl<'a> KernelRows<'a> {
    fn new(x: Matrix<'a>, kernel: Kernel, gamma: f64) -> Self {
        let n = x.rows();
        let row = |i: usize| &x.data[i * x.cols..(i + 1) * x.cols];
        let diag = (0..n).map(|i| kernel_value(kernel, gamma, row(i), row(i))).collect();
        let full = (n <= FULL_CACHE_ROWS).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel_value(kernel, gamma, row(i), row(j));
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        KernelRows {
            x,
            kernel,
            gamma,
            full,
            diag,
        }
    }

    fn row(&self, i: usize, out: &mut [f64]) {
        let n = self.diag.len();
        match &self.full {
            Some(k) => out.copy_from_slice(&k[i * n..(i + 1) * n]),
            None => {
                let xi = &self.x.data[i * self.x.cols..(i + 1) * self.x.cols];
                for (j, o) in out.iter_mut().enumerate() {
                    let xj = &self.x.data[j * self.x.cols..(j + 1) * self.x.cols];
                    *o = kernel_value(self.kernel, self.gamma, xi, xj);
                }
            }
        }
    }
}

/// Trained dual state, kept for KKT checks.
#[derive(Debug, Clone)]
pub struct SvcSolution {
    pub model: Svc,
    pub alpha: Vec<f64>,
}

pub fn train_svc(x: Matrix<'_>, labels: &[u8], params: &SvcParams) -> Result<SvcSolution> {
    params.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite feature value".into()));
    }
    let gamma = match params.kernel {
        Kernel::Linear => 0.0,
        Kernel::Rbf => params.gamma.unwrap_or_else(|| default_gamma(x)),
    };
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let c = params.c;
    let k = KernelRows::new(x, params.kernel, gamma);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let (mut ki, mut kj) = (vec![0.0; n], vec![0.0; n]);
    let is_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < params.max_iter {
        // first index: maximal violating -y G over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if is_low(alpha[t], y[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        if i == usize::MAX || gmax - gmin < params.tolerance {
            converged = true;
            break;
        }
        k.row(i, &mut ki);
        // second index: largest guaranteed objective decrease
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b <= 0.0 {
                continue;
            }
            let a = k.diag[i] + k.diag[t] - 2.0 * ki[t];
            let a = if a > 0.0 { a } else { TAU };
            let obj = -(b * b) / a;
            if obj < best {
                best = obj;
                j = t;
            }
        }
        if j == usize::MAX {
            converged = true;
            break;
        }
        k.row(j, &mut kj);
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let quad = {
            let q = k.diag[i] + k.diag[j] - 2.0 * ki[j];
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
    if !converged {
        log::warn!(
            "SMO stopped at the iteration cap ({}) before convergence",
            params.max_iter
        );
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_n += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support.extend_from_slice(&x.data[t * x.cols..(t + 1) * x.cols]);
            coef.push(alpha[t] * y[t]);
        }
    }
    Ok(SvcSolution {
        model: Svc {
            kernel: params.kernel,
            gamma,
            support,
            dims: x.cols,
            coef,
            bias: -rho,
            iterations,
            converged,
        },
        alpha,
    })
}

/// Largest violation of the soft-margin KKT conditions, measured on
/// `y_i f(x_i)` with free vectors required to sit on the margin.
pub fn kkt_violation(sol: &SvcSolution, x: Matrix<'_>, labels: &[u8], c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, &l) in labels.iter().enumerate() {
        let y = if l == 1 { 1.0 } else { -1.0 };
        let m = y * sol.model.decision(&x.data[t * x.cols..(t + 1) * x.cols]);
        let a = sol.alpha[t];
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_the_perpendicular_bisector() {
        let data = [0.0, 0.0, 2.0, 2.0];
        let p = SvcParams {
            kernel: Kernel::Linear,
            ..Default::default()
        };
        let sol = train_svc(Matrix::new(&data, 2), &[0, 1], &p).unwrap();
        assert!(sol.model.converged);
        assert_eq!(sol.model.coef.len(), 2);
        // w = (x2 - x1) / 4, boundary through the midpoint (1, 1)
        assert!(sol.model.decision(&[1.0, 1.0]).abs() < 1e-6);
        assert!(sol.model.decision(&[2.0, 0.0]).abs() < 1e-6);
        assert!((sol.model.decision(&[2.0, 2.0]) - 1.0).abs() < 1e-6);
        assert!((sol.alpha[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn conflicting_duplicates_converge() {
        let data = [1.0, 1.0, 1.0, 1.0, 3.0, 3.0];
        let sol = train_svc(Matrix::new(&data, 2), &[0, 1, 1], &SvcParams::default()).unwrap();
        assert!(sol.model.converged);
        assert!(sol.model.decision(&[1.0, 1.0]).is_finite());
    }

    #[test]
    fn gamma_uses_mean_feature_variance() {
        // variances 1 and 4 → mean 2.5, d = 2 → gamma = 0.2
        let data = [-1.0, -2.0, 1.0, 2.0];
        assert!((default_gamma(Matrix::new(&data, 2)) - 0.2).abs() < 1e-15);
        assert_eq!(default_gamma(Matrix::new(&[3.0, 3.0], 1)), 1.0);
    }
}
