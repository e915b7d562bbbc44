//! Gradient-boosted regression trees under logistic loss.

use serde::{Deserialize, Serialize};

use super::tree::{grow_regression_tree, presort, Matrix, Node, Tree};
use crate::error::{Error, Result};

/// Prior probabilities are clipped to `[P_CLIP, 1 - P_CLIP]` before taking
/// log-odds.
const P_CLIP: f64 = 1e-6;
/// Step halvings tried before a round is dropped.
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams {
            rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

impl BoostingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("boosting trees need depth ≥ 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosting {
    pub init: f64,
    /// Trees with shrinkage already folded into the leaves.
    pub trees: Vec<Tree>,
    /// Training log-loss after initialisation and after each round.
    pub loss_history: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of raw scores.
pub fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &l)| if l == 1 { softplus(-s) } else { softplus(s) })
        .sum();
    total / y.len() as f64
}

impl Boosting {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// `sigmoid(score) ≥ 0.5`, i.e. `score ≥ 0`.
    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

fn scale_leaves(tree: &mut Tree, factor: f64) {
    for node in &mut tree.nodes {
        if let Node::Leaf { value } = node {
            *value *= factor;
        }
    }
}

pub fn train_gradient_boosting(x: Matrix<'_>, y: &[u8], params: &BoostingParams) -> Result<Boosting> {
    params.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    let fake = y.iter().filter(|&&l| l == 1).count();
    let p = (fake as f64 / n as f64).clamp(P_CLIP, 1.0 - P_CLIP);
    let init = (p / (1.0 - p)).ln();
    let mut scores = vec![init; n];
    let mut loss = log_loss(&scores, y);
    let mut model = Boosting {
        init,
        trees: Vec::new(),
        loss_history: vec![loss],
    };
    if fake == 0 || fake == n {
        return Ok(model);
    }

    let sorted = presort(x);
    let target: Vec<f64> = y.iter().map(|&l| l as f64).collect();
    for _ in 0..params.rounds {
        let prob: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        let r: Vec<f64> = target.iter().zip(&prob).map(|(t, p)| t - p).collect();
        let h: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
        let mut tree = grow_regression_tree(x, &sorted, &r, &h, params.max_depth, params.min_samples_leaf);
        scale_leaves(&mut tree, params.learning_rate);

        // Newton steps are not guaranteed descent steps; halve until the
        // loss does not rise.
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| s + tree.predict(&x.data[i * x.cols..(i + 1) * x.cols]))
                .collect();
            let trial_loss = log_loss(&trial, y);
            if trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            scale_leaves(&mut tree, 0.5);
        }
        match accepted {
            Some((trial, trial_loss)) => {
                scores = trial;
                loss = trial_loss;
                model.trees.push(tree);
            }
            None => log::debug!("boosting round made no progress; tree dropped"),
        }
        model.loss_history.push(loss);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_keeps_the_clipped_prior() {
        let data = [0.0, 1.0, 2.0];
        let m = train_gradient_boosting(Matrix::new(&data, 1), &[1, 1, 1], &BoostingParams::default()).unwrap();
        assert!(m.trees.is_empty());
        let p = 1.0 - P_CLIP;
        let expected = (p / (1.0 - p)).ln();
        assert_eq!(m.score(&[5.0]), expected);
        assert_eq!(m.predict(&[-3.0]), 1);
    }

    #[test]
    fn xor_is_learned() {
        let data = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let y = [0, 1, 1, 0];
        let m = train_gradient_boosting(Matrix::new(&data, 2), &y, &BoostingParams::default()).unwrap();
        for (i, &l) in y.iter().enumerate() {
            assert_eq!(m.predict(&data[2 * i..2 * i + 2]), l);
        }
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn loss_is_stable_for_large_scores() {
        assert_eq!(log_loss(&[800.0], &[1]), 0.0);
        assert!((log_loss(&[-800.0], &[1]) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-800.0), 0.0);
    }
}
