//! Random forests (bootstrap + best split over a feature subset) and extra
//! trees (full sample + one random threshold per candidate feature).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_class_tree, ClassTreeParams, Matrix, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Majority vote; ties go to class 0.
    pub fn predict(&self, x: &[f64]) -> u8 {
        let fake = self.trees.iter().filter(|t| t.predict(x) >= 0.5).count();
        u8::from(2 * fake > self.trees.len())
    }
}

/// Random stream for tree `index`: one ChaCha stream per tree under a shared
/// key, so results do not depend on how trees are scheduled.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn train(x: Matrix<'_>, y: &[u8], params: &ForestParams, seed: u64, extra: bool) -> Result<Forest> {
    params.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    let tree_params = ClassTreeParams {
        max_features: params.max_features.resolve(x.cols),
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        random_thresholds: extra,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let samples = if extra {
                (0..n).collect()
            } else {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            };
            grow_class_tree(x, y, samples, &tree_params, &mut rng)
        })
        .collect();
    Ok(Forest { trees })
}

pub fn train_random_forest(x: Matrix<'_>, y: &[u8], params: &ForestParams, seed: u64) -> Result<Forest> {
    train(x, y, params, seed, false)
}

pub fn train_extra_trees(x: Matrix<'_>, y: &[u8], params: &ForestParams, seed: u64) -> Result<Forest> {
    train(x, y, params, seed, true)
}
