//! Run configuration: defaults, then the `--config` file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use kazefuse::fuse::{ExtractorParams, Scheme};
use kazefuse::keyframe::KeyframePolicy;
use kazefuse::learn::{ClassifierSpec, SplitSpec, TrainConfig};
use kazefuse::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyframeConfig {
    /// Frame rate used to time frames that carry no timestamp.
    pub fps: f64,
    #[serde(flatten)]
    pub policy: KeyframePolicy,
}

impl Default for KeyframeConfig {
    fn default() -> Self {
        KeyframeConfig {
            fps: 25.0,
            policy: KeyframePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub runs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { runs: 3 }
    }
}

/// Everything a run depends on. The top-level `seed` is the only source of
/// randomness; it is copied into the split and synth sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; unset means one per core.
    pub threads: Option<usize>,
    pub scheme: Scheme,
    pub standardize: bool,
    pub extractor: ExtractorParams,
    pub keyframes: KeyframeConfig,
    pub classifier: ClassifierSpec,
    pub split: SplitSpec,
    pub bench: BenchConfig,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: kazefuse::DEFAULT_SEED,
            threads: None,
            scheme: Scheme::HogKaze,
            standardize: false,
            extractor: ExtractorParams::default(),
            keyframes: KeyframeConfig::default(),
            classifier: ClassifierSpec::default(),
            split: SplitSpec::default(),
            bench: BenchConfig::default(),
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Propagates the seed into the sections that carry their own copy.
    pub fn finish(&mut self) {
        self.split.seed = self.seed;
        self.synth.seed = self.seed;
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            classifier: self.classifier,
            standardize: self.standardize,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Internal(format!("config does not serialize: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, self.to_toml()?.as_bytes())?;
        log::info!("effective config written to {}", path.display());
        Ok(())
    }
}

/// `<path>.config.toml`, the effective config written beside an output file.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    path.with_file_name(name)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    make_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Creates the directory `path` will be written into.
pub fn make_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.finish();
        let text = c.to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: RunConfig = toml::from_str(
            "seed = 7\nscheme = \"lbp+kaze\"\n[classifier]\nkind = \"random_forest\"\nn_trees = 11\n[extractor.lbp]\nbands = 3\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.scheme, Scheme::LbpKaze);
        assert_eq!(c.extractor.lbp.bands, 3);
        assert_eq!(c.extractor.lbp.neighbors, 12);
        match c.classifier {
            ClassifierSpec::RandomForest(p) => assert_eq!(p.n_trees, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 7\n").is_err());
    }

    #[test]
    fn sidecar_appends_to_the_file_name() {
        assert_eq!(sidecar(Path::new("out/f.csv")), PathBuf::from("out/f.csv.config.toml"));
    }
}
