//! Keyframe selection: head/tail skipping, fixed-interval sampling and
//! similarity-threshold deduplication against the last kept frame.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{frame_similarity, resize, GrayImage, WORKING_SIZE};

/// Slack for comparing sampling times built from `index / fps`.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub path: PathBuf,
}

/// Ordered frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        for w in frames.windows(2) {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(Error::InvalidParameter(format!(
                    "timestamps must be strictly increasing ({} then {} at {})",
                    w[0].timestamp,
                    w[1].timestamp,
                    w[1].path.display()
                )));
            }
        }
        if let Some(f) = frames.iter().find(|f| !f.timestamp.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite timestamp for {}",
                f.path.display()
            )));
        }
        Ok(FrameSequence { frames })
    }

    /// Frames at `index / fps`.
    pub fn from_paths(paths: Vec<PathBuf>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidParameter(format!("fps must be > 0, got {fps}")));
        }
        Self::new(
            paths
                .into_iter()
                .enumerate()
                .map(|(i, path)| Frame {
                    timestamp: i as f64 / fps,
                    path,
                })
                .collect(),
        )
    }

    /// Parses a manifest: one frame per line, either `path` or
    /// `timestamp<TAB>path`. Blank lines and `#` comments are ignored.
    /// Lines without a timestamp are timed at `line_index / fps`; relative
    /// paths resolve against `base`.
    pub fn from_manifest(text: &str, base: &Path, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidParameter(format!("fps must be > 0, got {fps}")));
        }
        let mut frames = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (timestamp, raw_path) = match line.split_once('\t') {
                Some((ts, p)) => {
                    let ts: f64 = ts.trim().parse().map_err(|_| {
                        Error::MalformedFile(format!("manifest line {}: bad timestamp `{ts}`", lineno + 1))
                    })?;
                    (ts, p.trim())
                }
                None => (frames.len() as f64 / fps, line.trim()),
            };
            let path = Path::new(raw_path);
            let path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            };
            frames.push(Frame { timestamp, path });
        }
        Self::new(frames)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeyframePolicy {
    /// Minimum spacing between sampled frames, seconds.
    pub interval: f64,
    pub skip_head: usize,
    pub skip_tail: usize,
    pub skip_enabled: bool,
    /// Deduplication threshold τ: a sampled frame is kept only when its
    /// similarity score to the last kept frame exceeds τ.
    pub dedup_threshold: f64,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        KeyframePolicy {
            interval: 0.5,
            skip_head: 10,
            skip_tail: 10,
            skip_enabled: true,
            dedup_threshold: 0.05,
        }
    }
}

impl KeyframePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "keyframe interval must be > 0, got {}",
                self.interval
            )));
        }
        if !(0.0..=1.0).contains(&self.dedup_threshold) {
            return Err(Error::InvalidParameter(format!(
                "dedup threshold must lie in [0, 1], got {}",
                self.dedup_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameDecision {
    SkippedHeadTail,
    NotSampled,
    Kept,
    Duplicate,
}

/// One line of the selection log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLogEntry {
    pub index: usize,
    pub timestamp: f64,
    pub path: PathBuf,
    pub decision: FrameDecision,
    /// Score against the last kept frame, when one was computed.
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Keyframe {
    pub index: usize,
    pub timestamp: f64,
    pub path: PathBuf,
    /// The decoded frame at its source resolution.
    pub image: GrayImage,
}

#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub keyframes: Vec<Keyframe>,
    pub log: Vec<FrameLogEntry>,
}

/// Runs the selection rule over `seq`, decoding only sampled frames.
///
/// Similarity is measured on `WORKING_SIZE` thumbnails of both frames; the
/// returned keyframes keep their original resolution.
pub fn select_keyframes<F>(seq: &FrameSequence, policy: &KeyframePolicy, mut load: F) -> Result<Selection>
where
    F: FnMut(&Path) -> Result<GrayImage>,
{
    policy.validate()?;
    let frames = seq.frames();
    let (start, end) = if policy.skip_enabled {
        let start = policy.skip_head.min(frames.len());
        let end = frames.len().saturating_sub(policy.skip_tail).max(start);
        (start, end)
    } else {
        (0, frames.len())
    };

    let mut out = Selection::default();
    let mut last_sampled_time: Option<f64> = None;
    let mut last_kept: Option<GrayImage> = None;

    for (index, frame) in frames.iter().enumerate() {
        let mut entry = FrameLogEntry {
            index,
            timestamp: frame.timestamp,
            path: frame.path.clone(),
            decision: FrameDecision::SkippedHeadTail,
            similarity: None,
        };
        if index < start || index >= end {
            out.log.push(entry);
            continue;
        }
        let due = match last_sampled_time {
            None => true,
            Some(t) => frame.timestamp >= t + policy.interval - TIME_EPS,
        };
        if !due {
            entry.decision = FrameDecision::NotSampled;
            out.log.push(entry);
            continue;
        }
        last_sampled_time = Some(frame.timestamp);

        let image = load(&frame.path).map_err(|e| Error::FrameLoadFailure {
            path: frame.path.clone(),
            source: Box::new(e),
        })?;
        let thumb = resize(&image, WORKING_SIZE, WORKING_SIZE)?;
        let keep = match &last_kept {
            None => true,
            Some(prev) => {
                let score = frame_similarity(prev, &thumb)?.value();
                entry.similarity = Some(score);
                score > policy.dedup_threshold
            }
        };
        if keep {
            entry.decision = FrameDecision::Kept;
            last_kept = Some(thumb);
            out.keyframes.push(Keyframe {
                index,
                timestamp: frame.timestamp,
                path: frame.path.clone(),
                image,
            });
        } else {
            entry.decision = FrameDecision::Duplicate;
        }
        out.log.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn synthetic(n: usize, fps: f64, pixel: impl Fn(usize) -> f64) -> (FrameSequence, HashMap<PathBuf, GrayImage>) {
        let paths: Vec<PathBuf> = (0..n).map(|i| PathBuf::from(format!("f{i:04}.pgm"))).collect();
        let images = paths
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), GrayImage::filled(32, 32, pixel(i)).unwrap()))
            .collect();
        (FrameSequence::from_paths(paths, fps).unwrap(), images)
    }

    fn run(seq: &FrameSequence, images: &HashMap<PathBuf, GrayImage>, policy: &KeyframePolicy) -> Selection {
        select_keyframes(seq, policy, |p| Ok(images[p].clone())).unwrap()
    }

    #[test]
    fn identical_frames_collapse_to_one() {
        let (seq, imgs) = synthetic(100, 30.0, |_| 90.0);
        let sel = run(&seq, &imgs, &KeyframePolicy::default());
        assert_eq!(sel.keyframes.len(), 1);
        assert!(sel.log.iter().any(|e| e.decision == FrameDecision::Duplicate));
    }

    #[test]
    fn skipping_can_exhaust_the_sequence() {
        let (seq, imgs) = synthetic(15, 30.0, |i| i as f64);
        let sel = run(&seq, &imgs, &KeyframePolicy::default());
        assert!(sel.keyframes.is_empty());

        let no_skip = KeyframePolicy {
            skip_enabled: false,
            ..Default::default()
        };
        assert_eq!(run(&seq, &imgs, &no_skip).keyframes.len(), 1);
    }

    #[test]
    fn alternating_frames_are_sampled_every_half_second() {
        // frames 10..50 survive skipping; sampling picks t = 10/30, 25/30, 40/30
        let (seq, imgs) = synthetic(60, 30.0, |i| if i % 2 == 0 { 0.0 } else { 255.0 });
        let sel = run(&seq, &imgs, &KeyframePolicy::default());
        let idx: Vec<usize> = sel.keyframes.iter().map(|k| k.index).collect();
        assert_eq!(idx, vec![10, 25, 40]);
        let scores: Vec<f64> = sel.log.iter().filter_map(|e| e.similarity).collect();
        assert_eq!(scores, vec![1.0, 1.0]);
    }

    #[test]
    fn threshold_extremes() {
        let (seq, imgs) = synthetic(200, 30.0, |i| ((i / 7) % 5) as f64 * 10.0);
        let zero = KeyframePolicy {
            dedup_threshold: 0.0,
            ..Default::default()
        };
        let one = KeyframePolicy {
            dedup_threshold: 1.0,
            ..Default::default()
        };
        let sampled = run(&seq, &imgs, &zero)
            .log
            .iter()
            .filter(|e| matches!(e.decision, FrameDecision::Kept | FrameDecision::Duplicate))
            .count();
        let kept_zero = run(&seq, &imgs, &zero).keyframes.len();
        assert!(kept_zero <= sampled);
        assert!(run(&seq, &imgs, &one).keyframes.len() <= 1);

        let mut prev = usize::MAX;
        for tau in [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0] {
            let policy = KeyframePolicy {
                dedup_threshold: tau,
                ..Default::default()
            };
            let n = run(&seq, &imgs, &policy).keyframes.len();
            assert!(n <= prev, "tau {tau} increased keyframes");
            prev = n;
        }
    }

    #[test]
    fn load_failure_names_the_path() {
        let (seq, _) = synthetic(30, 30.0, |_| 0.0);
        let err = select_keyframes(&seq, &KeyframePolicy::default(), |_| {
            Err(Error::MalformedFile("boom".into()))
        })
        .unwrap_err();
        match err {
            Error::FrameLoadFailure { path, .. } => assert_eq!(path, PathBuf::from("f0010.pgm")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_parsing() {
        let text = "# frames\n0.0\ta.png\n0.25\tb.png\n\n1.0\t/abs/c.png\n";
        let seq = FrameSequence::from_manifest(text, Path::new("/root"), 30.0).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.frames()[1].path, PathBuf::from("/root/b.png"));
        assert_eq!(seq.frames()[2].path, PathBuf::from("/abs/c.png"));

        let untimed = FrameSequence::from_manifest("a.png\nb.png\n", Path::new("."), 10.0).unwrap();
        assert_eq!(untimed.frames()[1].timestamp, 0.1);

        assert!(FrameSequence::from_manifest("1.0\ta\n0.5\tb\n", Path::new("."), 30.0).is_err());
        assert!(FrameSequence::from_manifest("x\ta\n", Path::new("."), 30.0).is_err());
    }

    #[test]
    fn policy_validation() {
        let bad = KeyframePolicy {
            interval: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = KeyframePolicy {
            dedup_threshold: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
