use serde::{Deserialize, Serialize};

use super::tree::Matrix;

/// Per-feature z-score fitted on training rows. Constant features keep
/// unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: Matrix<'_>) -> Self {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols];
        let mut scale = vec![0.0; x.cols];
        for j in 0..x.cols {
            let m = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
            let var = (0..x.rows()).map(|i| (x.get(i, j) - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, data: &[f64]) -> Vec<f64> {
        data.chunks(self.mean.len()).flat_map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_columns() {
        let data = [1.0, 5.0, 3.0, 5.0];
        let s = Standardizer::fit(Matrix::new(&data, 2));
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 6.0]), vec![1.0, 1.0]);
    }
}
