use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuse::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    /// Keep rows whose source files share a name (without directory and
    /// extension) on the same side, e.g. a fake and the real frame it was
    /// made from.
    pub grouped: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: crate::DEFAULT_SEED,
            stratified: true,
            grouped: false,
        }
    }
}

/// Train/test partition. Within each class `round(n · train_fraction)` rows
/// (at least one on each side) go to training; both outputs keep the
/// original row order.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie strictly between 0 and 1, got {}",
            spec.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let take = |n: usize| ((n as f64 * spec.train_fraction).round() as usize).clamp(1, n - 1);
    let mut train = Vec::new();
    if spec.grouped {
        train = grouped_train_rows(ds, spec, &mut rng)?;
    } else if spec.stratified {
        for label in 0..2u8 {
            let mut idx: Vec<usize> = (0..ds.rows()).filter(|&i| ds.labels()[i] == label).collect();
            if idx.len() < 2 {
                return Err(Error::ClassTooSmall {
                    label,
                    count: idx.len(),
                });
            }
            idx.shuffle(&mut rng);
            train.extend_from_slice(&idx[..take(idx.len())]);
        }
    } else {
        if ds.rows() < 2 {
            return Err(Error::DegenerateData("need at least two rows to split".into()));
        }
        let mut idx: Vec<usize> = (0..ds.rows()).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..take(idx.len())]);
    }
    train.sort_unstable();
    finish(ds, &train)
}

fn finish(ds: &Dataset, train: &[usize]) -> Result<(Dataset, Dataset)> {
    let mut in_train = vec![false; ds.rows()];
    for &i in train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..ds.rows()).filter(|&i| !in_train[i]).collect();
    Ok((ds.subset(train), ds.subset(&test)))
}

fn group_key(source: &str) -> &str {
    let name = source.rsplit(['/', '\\']).next().unwrap_or(source);
    name.rsplit_once('.').map_or(name, |(stem, _)| stem)
}

/// Whole groups go to training, in shuffled order, while no class exceeds
/// its target count (when stratified) or the overall target (otherwise).
fn grouped_train_rows(ds: &Dataset, spec: &SplitSpec, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, src) in ds.sources().iter().enumerate() {
        groups.entry(group_key(src)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    if groups.len() < 2 {
        return Err(Error::DegenerateData("grouped split needs at least two groups".into()));
    }
    let counts = ds.class_counts();
    for (label, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                label: label as u8,
                count,
            });
        }
    }
    let target = |n: usize| (n as f64 * spec.train_fraction).round() as usize;
    groups.shuffle(rng);
    let mut taken = [0usize; 2];
    let mut train = Vec::new();
    for g in &groups {
        let mut add = [0usize; 2];
        for &i in g {
            add[ds.labels()[i] as usize] += 1;
        }
        let fits = if spec.stratified {
            (0..2).all(|c| taken[c] + add[c] <= target(counts[c]))
        } else {
            taken[0] + taken[1] + add[0] + add[1] <= target(ds.rows())
        };
        if fits {
            taken[0] += add[0];
            taken[1] += add[1];
            train.extend_from_slice(g);
        }
    }
    for (label, &count) in counts.iter().enumerate() {
        if taken[label] == 0 || taken[label] == count {
            return Err(Error::DegenerateData(format!(
                "grouped split leaves class {label} on one side only"
            )));
        }
    }
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuse::Scheme;

    fn balanced(real: usize, fake: usize) -> Dataset {
        let n = real + fake;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i >= real)).collect();
        Dataset::new(
            (0..n).map(|i| i as f64).collect(),
            1,
            y,
            (0..n).map(|i| format!("{i}")).collect(),
            Scheme::Hog,
            "fp".into(),
        )
        .unwrap()
    }

    #[test]
    fn exact_ratio() {
        let (train, test) = stratified_split(&balanced(100, 100), &SplitSpec::default()).unwrap();
        assert_eq!(train.class_counts(), [80, 80]);
        assert_eq!(test.class_counts(), [20, 20]);
    }

    #[test]
    fn deterministic_disjoint_and_exhaustive() {
        let ds = balanced(37, 23);
        let spec = SplitSpec {
            seed: 5,
            ..Default::default()
        };
        let (a, b) = stratified_split(&ds, &spec).unwrap();
        let (a2, b2) = stratified_split(&ds, &spec).unwrap();
        assert_eq!((&a, &b), (&a2, &b2));
        let mut all: Vec<f64> = a.x().iter().chain(b.x()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..60).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn grouped_split_keeps_pairs_together() {
        let n = 50;
        let y: Vec<u8> = (0..2 * n).map(|i| u8::from(i >= n)).collect();
        let sources: Vec<String> = (0..2 * n)
            .map(|i| format!("{}/{:03}.pgm", if i < n { "real" } else { "fake" }, i % n))
            .collect();
        let ds = Dataset::new(
            (0..2 * n).map(|i| i as f64).collect(),
            1,
            y,
            sources,
            Scheme::Hog,
            "fp".into(),
        )
        .unwrap();
        let spec = SplitSpec {
            grouped: true,
            ..Default::default()
        };
        let (train, test) = stratified_split(&ds, &spec).unwrap();
        assert_eq!(train.class_counts(), [40, 40]);
        assert_eq!(test.class_counts(), [10, 10]);
        let names = |d: &Dataset| {
            let mut v: Vec<String> = d.sources().iter().map(|s| group_key(s).to_string()).collect();
            v.sort();
            v.dedup();
            v
        };
        let (a, b) = (names(&train), names(&test));
        assert!(a.iter().all(|k| !b.contains(k)));
        assert_eq!(a.len() + b.len(), n);
    }

    #[test]
    fn tiny_class_is_rejected() {
        let err = stratified_split(&balanced(10, 1), &SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { label: 1, count: 1 }));
    }
}
