//! Model files: one header line `KAZEFUSE-MODEL <major>.<minor>` followed by
//! the model as JSON. Floats are written in shortest round-trip form, so a
//! loaded model predicts bit-identically.

use std::fs;
use std::path::Path;

use super::TrainedModel;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: &str = "1.0";
const MAGIC: &str = "KAZEFUSE-MODEL";

pub fn model_to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let body = serde_json::to_string(model).map_err(|e| Error::CorruptModel(format!("cannot serialize model: {e}")))?;
    Ok(format!("{MAGIC} {MODEL_FORMAT_VERSION}\n{body}\n").into_bytes())
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::CorruptModel("not UTF-8".into()))?;
    let (head, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::CorruptModel("missing header line".into()))?;
    let version = head
        .strip_prefix(MAGIC)
        .and_then(|v| v.strip_prefix(' '))
        .ok_or_else(|| Error::CorruptModel(format!("bad header `{head}`")))?
        .trim();
    let major = |v: &str| v.split('.').next().map(str::to_string);
    if major(version) != major(MODEL_FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version.to_string(),
            supported: MODEL_FORMAT_VERSION.to_string(),
        });
    }
    serde_json::from_str(body).map_err(|e| Error::CorruptModel(e.to_string()))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuse::{Dataset, Scheme};
    use crate::learn::{train, ClassifierKind, TrainConfig};

    fn model() -> TrainedModel {
        let x: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 / 3.0).collect();
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let ds = Dataset::new(
            x,
            2,
            y,
            (0..20).map(|i| i.to_string()).collect(),
            Scheme::Kaze,
            "fp".into(),
        )
        .unwrap();
        let config = TrainConfig {
            classifier: ClassifierKind::GradientBoosting.default_spec(),
            ..Default::default()
        };
        train(&ds, &config).unwrap()
    }

    #[test]
    fn round_trip() {
        let m = model();
        let back = model_from_bytes(&model_to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_and_future_files() {
        let bytes = model_to_bytes(&model()).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(model_from_bytes(cut), Err(Error::CorruptModel(_))));
        assert!(matches!(model_from_bytes(b"hello"), Err(Error::CorruptModel(_))));
        let text = String::from_utf8(bytes).unwrap().replacen("MODEL 1.0", "MODEL 2.0", 1);
        assert!(matches!(
            model_from_bytes(text.as_bytes()),
            Err(Error::VersionMismatch { .. })
        ));
    }
}
