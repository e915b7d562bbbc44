//! Classifiers (random forest, extra trees, gradient boosting, SVC),
//! stratified splitting, evaluation and model files.

mod boosting;
mod forest;
mod metrics;
mod persist;
mod scale;
mod split;
mod svc;
pub mod tree;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuse::{Dataset, Scheme};
use tree::Matrix;

pub use boosting::{log_loss, sigmoid, train_gradient_boosting, Boosting, BoostingParams};
pub use forest::{train_extra_trees, train_random_forest, tree_rng, Forest, ForestParams, MaxFeatures};
pub use metrics::{Confusion, EvalReport};
pub use persist::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_FORMAT_VERSION};
pub use scale::Standardizer;
pub use split::{stratified_split, SplitSpec};
pub use svc::{default_gamma, kkt_violation, train_svc, Kernel, Svc, SvcParams, SvcSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    RandomForest,
    ExtraTrees,
    GradientBoosting,
    Svc,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::RandomForest,
        ClassifierKind::ExtraTrees,
        ClassifierKind::GradientBoosting,
        ClassifierKind::Svc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::ExtraTrees => "extra-trees",
            ClassifierKind::GradientBoosting => "gradient-boosting",
            ClassifierKind::Svc => "svc",
        }
    }

    pub fn default_spec(self) -> ClassifierSpec {
        match self {
            ClassifierKind::RandomForest => ClassifierSpec::RandomForest(ForestParams::default()),
            ClassifierKind::ExtraTrees => ClassifierSpec::ExtraTrees(ForestParams::default()),
            ClassifierKind::GradientBoosting => ClassifierSpec::GradientBoosting(BoostingParams::default()),
            ClassifierKind::Svc => ClassifierSpec::Svc(SvcParams::default()),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random-forest" | "rf" => Ok(ClassifierKind::RandomForest),
            "extra-trees" | "et" => Ok(ClassifierKind::ExtraTrees),
            "gradient-boosting" | "gb" | "xgb" => Ok(ClassifierKind::GradientBoosting),
            "svc" | "svm" => Ok(ClassifierKind::Svc),
            other => Err(Error::InvalidParameter(format!(
                "unknown classifier `{other}` (expected random-forest, extra-trees, gradient-boosting or svc)"
            ))),
        }
    }
}

/// Classifier choice with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    GradientBoosting(BoostingParams),
    Svc(SvcParams),
}

impl ClassifierSpec {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::RandomForest(_) => ClassifierKind::RandomForest,
            ClassifierSpec::ExtraTrees(_) => ClassifierKind::ExtraTrees,
            ClassifierSpec::GradientBoosting(_) => ClassifierKind::GradientBoosting,
            ClassifierSpec::Svc(_) => ClassifierKind::Svc,
        }
    }
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierKind::Svc.default_spec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub classifier: ClassifierSpec,
    /// z-score features using training statistics before fitting.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            classifier: ClassifierSpec::default(),
            standardize: false,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "state", rename_all = "snake_case")]
pub enum ModelState {
    Forest(Forest),
    Boosting(Boosting),
    Svc(Svc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub hyperparameters: ClassifierSpec,
    pub standardize: bool,
    pub train_rows: usize,
    pub wall_time_secs: f64,
    /// False when SMO hit its iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub scheme: Scheme,
    pub fingerprint: String,
    pub feature_dims: usize,
    pub meta: TrainingMeta,
    pub standardizer: Option<Standardizer>,
    pub state: ModelState,
}

impl TrainedModel {
    /// Label of one feature row.
    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        if row.len() != self.feature_dims {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, got {}",
                self.feature_dims,
                row.len()
            )));
        }
        let scaled;
        let row = match &self.standardizer {
            Some(s) => {
                scaled = s.apply(row);
                &scaled[..]
            }
            None => row,
        };
        Ok(match &self.state {
            ModelState::Forest(f) => f.predict(row),
            ModelState::Boosting(b) => b.predict(row),
            ModelState::Svc(s) => s.predict(row),
        })
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if ds.fingerprint() != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                found: ds.fingerprint().to_string(),
            });
        }
        if ds.cols() != self.feature_dims {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} features, dataset has {}",
                self.feature_dims,
                ds.cols()
            )));
        }
        Ok(())
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<u8>> {
        self.check(ds)?;
        (0..ds.rows())
            .into_par_iter()
            .map(|i| self.predict(ds.row(i)))
            .collect()
    }
}

pub fn train(ds: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    if ds.is_empty() {
        return Err(Error::DegenerateData("empty training set".into()));
    }
    if ds.x().iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("training data contains non-finite values".into()));
    }
    let started = Instant::now();
    let standardizer = config
        .standardize
        .then(|| Standardizer::fit(Matrix::new(ds.x(), ds.cols())));
    let scaled;
    let data = match &standardizer {
        Some(s) => {
            scaled = s.apply_all(ds.x());
            &scaled[..]
        }
        None => ds.x(),
    };
    let x = Matrix::new(data, ds.cols());
    let y = ds.labels();
    let mut converged = true;
    let state = match &config.classifier {
        ClassifierSpec::RandomForest(p) => ModelState::Forest(train_random_forest(x, y, p, config.seed)?),
        ClassifierSpec::ExtraTrees(p) => ModelState::Forest(train_extra_trees(x, y, p, config.seed)?),
        ClassifierSpec::GradientBoosting(p) => ModelState::Boosting(train_gradient_boosting(x, y, p)?),
        ClassifierSpec::Svc(p) => {
            let sol = train_svc(x, y, p)?;
            converged = sol.model.converged;
            ModelState::Svc(sol.model)
        }
    };
    Ok(TrainedModel {
        kind: config.classifier.kind(),
        scheme: ds.scheme(),
        fingerprint: ds.fingerprint().to_string(),
        feature_dims: ds.cols(),
        meta: TrainingMeta {
            seed: config.seed,
            hyperparameters: config.classifier,
            standardize: config.standardize,
            train_rows: ds.rows(),
            wall_time_secs: started.elapsed().as_secs_f64(),
            converged,
        },
        standardizer,
        state,
    })
}

pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<EvalReport> {
    let predicted = model.predict_dataset(test)?;
    Ok(EvalReport::from_predictions(test.labels(), &predicted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let label = (i % 2) as u8;
            let c = if label == 1 { 3.0 } else { -3.0 };
            x.extend([c + ((i * 7) % 5) as f64 * 0.2, c - ((i * 3) % 4) as f64 * 0.2]);
            y.push(label);
        }
        let n = y.len();
        Dataset::new(
            x,
            2,
            y,
            (0..n).map(|i| i.to_string()).collect(),
            Scheme::Hog,
            "fp".into(),
        )
        .unwrap()
    }

    #[test]
    fn every_classifier_separates_blobs() {
        let ds = blobs();
        for kind in ClassifierKind::ALL {
            for standardize in [false, true] {
                let config = TrainConfig {
                    classifier: kind.default_spec(),
                    standardize,
                    seed: 3,
                };
                let model = train(&ds, &config).unwrap();
                assert_eq!(evaluate(&model, &ds).unwrap().accuracy, 1.0, "{kind}");
            }
        }
    }

    #[test]
    fn fingerprint_and_width_are_checked() {
        let ds = blobs();
        let model = train(&ds, &TrainConfig::default()).unwrap();
        let other = Dataset::new(vec![0.0, 0.0], 2, vec![0], vec!["a".into()], Scheme::Hog, "zz".into()).unwrap();
        assert!(matches!(
            evaluate(&model, &other),
            Err(Error::FingerprintMismatch { .. })
        ));
        assert!(model.predict(&[1.0]).is_err());
    }

    #[test]
    fn kind_names() {
        for k in ClassifierKind::ALL {
            assert_eq!(k.name().parse::<ClassifierKind>().unwrap(), k);
        }
        assert_eq!(
            "xgb".parse::<ClassifierKind>().unwrap(),
            ClassifierKind::GradientBoosting
        );
    }
}
