//! Timing methodology: one untimed warm-up, then `n` timed runs per phase on
//! the monotonic clock.
//!
//! Durations are kept as exact rational numbers of nanoseconds, so averages,
//! per-instance times and the totals recovered from them satisfy their
//! defining identities exactly rather than to floating-point tolerance.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuse::{prepare_dataset, ExtractorParams, Scheme};
use crate::learn::{evaluate, stratified_split, train, EvalReport, SplitSpec, TrainConfig};

pub const REPORT_VERSION: u32 = 1;

/// Exact nanosecond count.
pub type Nanos = Ratio<u128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    FeatureExtraction,
    Training,
    Inference,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::FeatureExtraction => "feature extraction",
            Phase::Training => "training",
            Phase::Inference => "inference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSample {
    pub phase: Phase,
    /// Monotonic timestamps in nanoseconds since the measurement began.
    pub t_start: u128,
    pub t_end: u128,
    pub n_instances: u64,
}

impl TimingSample {
    pub fn duration(&self) -> u128 {
        self.t_end - self.t_start
    }
}

pub fn nanos_to_secs(v: Nanos) -> f64 {
    *v.numer() as f64 / *v.denom() as f64 / 1e9
}

/// The timed runs of one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub n_instances: u64,
    pub samples: Vec<TimingSample>,
}

impl PhaseTiming {
    pub fn new(phase: Phase, n_instances: u64, samples: Vec<TimingSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter(format!("{phase}: no timing samples")));
        }
        if n_instances == 0 {
            return Err(Error::InvalidParameter(format!("{phase}: instance count must be ≥ 1")));
        }
        Ok(PhaseTiming {
            phase,
            n_instances,
            samples,
        })
    }

    pub fn durations(&self) -> Vec<u128> {
        self.samples.iter().map(TimingSample::duration).collect()
    }

    /// Arithmetic mean of the run durations.
    pub fn mean(&self) -> Nanos {
        let total: u128 = self.durations().iter().sum();
        Ratio::new(total, self.samples.len() as u128)
    }

    /// Mean run duration divided by the instance count.
    pub fn per_instance(&self) -> Nanos {
        self.mean() / Ratio::from_integer(self.n_instances as u128)
    }

    /// `per_instance × N`.
    pub fn total_from_per_instance(&self) -> Nanos {
        self.per_instance() * Ratio::from_integer(self.n_instances as u128)
    }

    pub fn min(&self) -> u128 {
        self.durations().into_iter().min().expect("non-empty")
    }

    pub fn max(&self) -> u128 {
        self.durations().into_iter().max().expect("non-empty")
    }

    /// Median; the mean of the two middle runs for even counts.
    pub fn median(&self) -> Nanos {
        let mut d = self.durations();
        d.sort_unstable();
        let n = d.len();
        if n % 2 == 1 {
            Ratio::from_integer(d[n / 2])
        } else {
            Ratio::new(d[n / 2 - 1] + d[n / 2], 2)
        }
    }
}

/// Runs `workload` once untimed, then `n_runs` timed times. Returns the
/// timings and the output of the last run.
pub fn measure<T>(
    phase: Phase,
    n_runs: usize,
    n_instances: u64,
    mut workload: impl FnMut() -> Result<T>,
) -> Result<(PhaseTiming, T)> {
    if n_runs == 0 {
        return Err(Error::InvalidParameter("at least one timed run is required".into()));
    }
    let wrap = |e: Error| Error::WorkloadFailure {
        phase: phase.to_string(),
        source: Box::new(e),
    };
    let mut last = workload().map_err(wrap)?;
    let origin = Instant::now();
    let mut samples = Vec::with_capacity(n_runs);
    for _ in 0..n_runs {
        let t_start = origin.elapsed().as_nanos();
        last = workload().map_err(wrap)?;
        let t_end = origin.elapsed().as_nanos();
        samples.push(TimingSample {
            phase,
            t_start,
            t_end,
            n_instances,
        });
    }
    Ok((PhaseTiming::new(phase, n_instances, samples)?, last))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub threads: usize,
    pub cpu: String,
    pub os: String,
    pub arch: String,
    pub note: String,
}

impl Environment {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Environment {
            threads: rayon::current_num_threads(),
            cpu,
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            note: "CPU only; GPU timings are not measured. One warm-up run per phase is excluded.".into(),
        }
    }
}

/// Extraction, training and inference timings of one pipeline
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingReport {
    pub runs: usize,
    pub feature: PhaseTiming,
    pub training: PhaseTiming,
    pub inference: PhaseTiming,
    pub environment: Environment,
}

impl TimingReport {
    pub fn avg_feature_time(&self) -> Nanos {
        self.feature.mean()
    }

    pub fn per_instance_feature_time(&self) -> Nanos {
        self.feature.per_instance()
    }

    pub fn avg_training_time(&self) -> Nanos {
        self.training.mean()
    }

    pub fn per_instance_inference_time(&self) -> Nanos {
        self.inference.per_instance()
    }

    pub fn total_inference_time(&self) -> Nanos {
        self.inference.total_from_per_instance()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineBench {
    pub scheme: Scheme,
    pub classifier: String,
    pub fingerprint: String,
    pub timing: TimingReport,
    pub eval: EvalReport,
    /// Every timed run produced the same evaluation.
    pub eval_stable: bool,
}

/// Times feature extraction over the whole corpus, training on the train
/// split and inference on the test split.
pub fn bench_pipeline(
    corpus: &Path,
    scheme: Scheme,
    params: &ExtractorParams,
    split: &SplitSpec,
    config: &TrainConfig,
    n_runs: usize,
) -> Result<PipelineBench> {
    let (feature, ds) = measure(Phase::FeatureExtraction, n_runs, 1, || {
        prepare_dataset(corpus, scheme, params).map(|(ds, _)| ds)
    })?;
    let feature = PhaseTiming {
        n_instances: ds.rows() as u64,
        samples: feature
            .samples
            .into_iter()
            .map(|s| TimingSample {
                n_instances: ds.rows() as u64,
                ..s
            })
            .collect(),
        ..feature
    };
    let (train_ds, test_ds) = stratified_split(&ds, split)?;
    let (training, model) = measure(Phase::Training, n_runs, train_ds.rows() as u64, || {
        train(&train_ds, config)
    })?;

    let mut reports = Vec::with_capacity(n_runs);
    let (inference, _) = measure(Phase::Inference, n_runs, test_ds.rows() as u64, || {
        let r = evaluate(&model, &test_ds)?;
        reports.push(r);
        Ok(())
    })?;
    let eval = *reports.last().expect("at least one run");
    let eval_stable = reports.iter().all(|r| *r == eval);
    if !eval_stable {
        log::error!("evaluation changed between timed runs");
    }
    Ok(PipelineBench {
        scheme,
        classifier: config.classifier.kind().to_string(),
        fingerprint: ds.fingerprint().to_string(),
        timing: TimingReport {
            runs: n_runs,
            feature,
            training,
            inference,
            environment: Environment::detect(),
        },
        eval,
        eval_stable,
    })
}

fn ms(v: Nanos) -> f64 {
    nanos_to_secs(v) * 1e3
}

impl PipelineBench {
    /// Report file: `#` header lines, then the report as JSON.
    pub fn to_report_file(&self) -> String {
        let mut s = format!(
            "# kazefuse-bench {REPORT_VERSION}\n# fingerprint {}\n",
            self.fingerprint
        );
        let t = &self.timing;
        let exact = |v: Nanos| serde_json::json!({ "num": v.numer().to_string(), "den": v.denom().to_string(), "seconds": nanos_to_secs(v) });
        let body = serde_json::json!({
            "scheme": self.scheme,
            "classifier": self.classifier,
            "timing": t,
            "computed": {
                "avg_feature_time": exact(t.avg_feature_time()),
                "per_instance_feature_time": exact(t.per_instance_feature_time()),
                "avg_training_time": exact(t.avg_training_time()),
                "per_instance_inference_time": exact(t.per_instance_inference_time()),
                "total_inference_time": exact(t.total_inference_time()),
                "n_feature": t.feature.n_instances,
                "n_test": t.inference.n_instances,
            },
            "eval": self.eval,
            "eval_stable": self.eval_stable,
        });
        s.push_str(&serde_json::to_string_pretty(&body).expect("report serializes"));
        s.push('\n');
        s
    }

    /// Text table with one row per phase.
    pub fn table(&self) -> String {
        let t = &self.timing;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} + {} ({} timed runs, {} threads, {})",
            self.scheme, self.classifier, t.runs, t.environment.threads, t.environment.note
        );
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>12} {:>12} {:>12} {:>12} {:>14}",
            "phase", "N", "mean ms", "min ms", "median ms", "max ms", "per-inst ms"
        );
        for p in [&t.feature, &t.training, &t.inference] {
            let _ = writeln!(
                s,
                "{:<20} {:>8} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>14.5}",
                p.phase.to_string(),
                p.n_instances,
                ms(p.mean()),
                p.min() as f64 / 1e6,
                ms(p.median()),
                p.max() as f64 / 1e6,
                ms(p.per_instance()),
            );
        }
        let _ = write!(
            s,
            "accuracy {:.4} on {} test rows",
            self.eval.accuracy, self.eval.n_test
        );
        s
    }
}
