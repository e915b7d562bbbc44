use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use kazefuse::fuse::Scheme;
use kazefuse::hog::{GradientOperator, HogParams};
use kazefuse::kaze::KazeResolution;
use kazefuse::lbp::{LbpParams, LbpPreset};
use kazefuse::learn::{ClassifierKind, ClassifierSpec, Kernel};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "kazefuse",
    version,
    about = "Deepfake detection from fused LBP/HOG/KAZE features"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for extraction, forests and prediction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice (split, forests, synthetic corpus).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select keyframes from a frame directory or manifest.
    Keyframes(KeyframesArgs),
    /// Extract a feature file from a `real/` + `fake/` corpus.
    Features(FeaturesArgs),
    /// Train a classifier on a feature file.
    Train(TrainArgs),
    /// Evaluate a model on a feature file.
    Eval(EvalArgs),
    /// Time extraction, training and inference on a corpus.
    Bench(BenchArgs),
    /// Features, split, training and evaluation in one run.
    Pipeline(PipelineArgs),
    /// Write the synthetic real/fake benchmark corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["frames", "manifest"])))]
pub struct KeyframesArgs {
    /// Directory of frame images, in file-name order.
    #[arg(long, value_name = "DIR")]
    pub frames: Option<PathBuf>,
    /// Manifest with one `path` or `timestamp<TAB>path` per line.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Minimum spacing between sampled frames, seconds.
    #[arg(long)]
    pub interval: Option<f64>,
    #[arg(long)]
    pub skip_head: Option<usize>,
    #[arg(long)]
    pub skip_tail: Option<usize>,
    /// Keep the head and tail frames.
    #[arg(long)]
    pub no_skip: bool,
    /// Deduplication threshold τ in [0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(Debug, Default, Args)]
pub struct ExtractorArgs {
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Side of the square working image.
    #[arg(long)]
    pub resize: Option<usize>,
    #[arg(long)]
    pub no_log_transform: bool,
    /// `p12-r2` (P=12, R=2) or `p24-r3` (P=24, R=3).
    #[arg(long)]
    pub lbp_preset: Option<LbpPreset>,
    #[arg(long)]
    pub lbp_neighbors: Option<u32>,
    #[arg(long)]
    pub lbp_radius: Option<f64>,
    #[arg(long)]
    pub lbp_bands: Option<usize>,
    /// One bin per code instead of uniform-pattern bins.
    #[arg(long)]
    pub lbp_all_patterns: bool,
    #[arg(long)]
    pub hog_cell: Option<usize>,
    #[arg(long)]
    pub hog_bins: Option<usize>,
    /// Orientations over [0°, 360°) (18 bins unless --hog-bins is given).
    #[arg(long)]
    pub hog_signed: bool,
    #[arg(long)]
    pub hog_sobel: bool,
    /// KAZE vector length, a multiple of 64.
    #[arg(long)]
    pub kaze_m: Option<usize>,
    #[arg(long)]
    pub kaze_threshold: Option<f64>,
    /// Detect KAZE keypoints on the full-resolution frame.
    #[arg(long)]
    pub kaze_source_resolution: bool,
}

#[derive(Debug, Default, Args)]
pub struct ClassifierArgs {
    /// random-forest (rf), extra-trees (et), gradient-boosting (gb, xgb) or svc.
    #[arg(long)]
    pub classifier: Option<ClassifierKind>,
    /// Forest size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Tree depth limit (forests and boosting).
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Boosting rounds.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// SVC penalty C.
    #[arg(long = "svc-c")]
    pub svc_c: Option<f64>,
    /// RBF width; defaults to 1 / (d · mean feature variance).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub kernel: Option<KernelArg>,
    /// z-score features with training statistics.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Default, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Keep files with the same name (e.g. a fake and its source) on one side.
    #[arg(long)]
    pub grouped: bool,
    #[arg(long)]
    pub no_stratify: bool,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    /// Write working images, LBP codes, HOG magnitudes, KAZE levels and
    /// keypoint overlays as PGM.
    #[arg(long, value_name = "DIR")]
    pub dump_dir: Option<PathBuf>,
    /// Images per class to dump.
    #[arg(long, default_value_t = 5)]
    pub dump_limit: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Split first, train on the training part and write the held-out rows
    /// here as a feature file.
    #[arg(long, value_name = "FILE")]
    pub test_out: Option<PathBuf>,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub features: PathBuf,
    /// Structured report output.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Timed runs per phase (after one warm-up).
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Print the per-phase timing table.
    #[arg(long)]
    pub table: bool,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Real images; each gets one fake.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    #[arg(long)]
    pub blend: Option<f64>,
}

impl Cli {
    pub fn apply_globals(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if cfg.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(())
    }
}

impl KeyframesArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let k = &mut cfg.keyframes;
        set(&mut k.fps, self.fps);
        set(&mut k.policy.interval, self.interval);
        set(&mut k.policy.skip_head, self.skip_head);
        set(&mut k.policy.skip_tail, self.skip_tail);
        set(&mut k.policy.dedup_threshold, self.tau);
        if self.no_skip {
            k.policy.skip_enabled = false;
        }
    }
}

impl ExtractorArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        set(&mut cfg.scheme, self.scheme);
        let e = &mut cfg.extractor;
        set(&mut e.resize, self.resize);
        if self.no_log_transform {
            e.log_transform = false;
        }
        if let Some(preset) = self.lbp_preset {
            e.lbp = LbpParams {
                bands: e.lbp.bands,
                epsilon: e.lbp.epsilon,
                ..LbpParams::preset(preset)
            };
        }
        set(&mut e.lbp.neighbors, self.lbp_neighbors);
        set(&mut e.lbp.radius, self.lbp_radius);
        set(&mut e.lbp.bands, self.lbp_bands);
        if self.lbp_all_patterns {
            e.lbp.uniform = false;
        }
        if self.hog_signed {
            let signed = HogParams::signed_preset();
            e.hog.unsigned = false;
            e.hog.bin_count = signed.bin_count;
        }
        set(&mut e.hog.cell_size, self.hog_cell);
        set(&mut e.hog.bin_count, self.hog_bins);
        if self.hog_sobel {
            e.hog.gradient = GradientOperator::Sobel;
        }
        set(&mut e.kaze.m, self.kaze_m);
        set(&mut e.kaze.detector_threshold, self.kaze_threshold);
        if self.kaze_source_resolution {
            e.kaze.resolution = KazeResolution::Source;
        }
        e.validate(cfg.scheme)?;
        Ok(())
    }
}

impl ClassifierArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(kind) = self.classifier {
            if cfg.classifier.kind() != kind {
                cfg.classifier = kind.default_spec();
            }
        }
        if self.standardize {
            cfg.standardize = true;
        }
        let kind = cfg.classifier.kind();
        let reject =
            |flag: &str, applies: &str| Err(CliError::Usage(format!("--{flag} applies to {applies}, not to {kind}")));
        match &mut cfg.classifier {
            ClassifierSpec::RandomForest(p) | ClassifierSpec::ExtraTrees(p) => {
                set(&mut p.n_trees, self.trees);
                if self.max_depth.is_some() {
                    p.max_depth = self.max_depth;
                }
                if self.rounds.is_some() || self.learning_rate.is_some() {
                    return reject("rounds/--learning-rate", "gradient-boosting");
                }
                if self.svc_c.is_some() || self.gamma.is_some() || self.kernel.is_some() {
                    return reject("svc-c/--gamma/--kernel", "svc");
                }
                p.validate()?;
            }
            ClassifierSpec::GradientBoosting(p) => {
                set(&mut p.rounds, self.rounds);
                set(&mut p.learning_rate, self.learning_rate);
                set(&mut p.max_depth, self.max_depth);
                if self.trees.is_some() {
                    return reject("trees", "random-forest and extra-trees");
                }
                if self.svc_c.is_some() || self.gamma.is_some() || self.kernel.is_some() {
                    return reject("svc-c/--gamma/--kernel", "svc");
                }
                p.validate()?;
            }
            ClassifierSpec::Svc(p) => {
                set(&mut p.c, self.svc_c);
                if self.gamma.is_some() {
                    p.gamma = self.gamma;
                }
                if let Some(k) = self.kernel {
                    p.kernel = match k {
                        KernelArg::Linear => Kernel::Linear,
                        KernelArg::Rbf => Kernel::Rbf,
                    };
                }
                if self.trees.is_some() || self.max_depth.is_some() {
                    return reject("trees/--max-depth", "tree models");
                }
                if self.rounds.is_some() || self.learning_rate.is_some() {
                    return reject("rounds/--learning-rate", "gradient-boosting");
                }
                p.validate()?;
            }
        }
        Ok(())
    }
}

impl SplitArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        set(&mut cfg.split.train_fraction, self.train_fraction);
        if self.grouped {
            cfg.split.grouped = true;
        }
        if self.no_stratify {
            cfg.split.stratified = false;
        }
        let f = cfg.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!("train fraction must lie in (0, 1), got {f}")));
        }
        Ok(())
    }
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.synth;
        set(&mut s.pairs, self.pairs);
        set(&mut s.size, self.size);
        set(&mut s.patch, self.patch);
        set(&mut s.blur_sigma, self.blur_sigma);
        set(&mut s.blend, self.blend);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
