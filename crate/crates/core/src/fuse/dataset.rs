use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{extract_file, ExtractorParams, Scheme};
use crate::error::{Error, Result};
use crate::image::ImageFormat;

/// Class directory names, in label order (0 = real, 1 = fake).
pub const CLASS_DIRS: [&str; 2] = ["real", "fake"];

/// Labelled feature matrix; `x` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    cols: usize,
    y: Vec<u8>,
    sources: Vec<String>,
    scheme: Scheme,
    fingerprint: String,
}

impl Dataset {
    pub fn new(
        x: Vec<f64>,
        cols: usize,
        y: Vec<u8>,
        sources: Vec<String>,
        scheme: Scheme,
        fingerprint: String,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(Error::SchemaMismatch("a dataset needs at least one column".into()));
        }
        if x.len() != y.len() * cols || sources.len() != y.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} values, {} labels and {} sources do not form a {}-column matrix",
                x.len(),
                y.len(),
                sources.len(),
                cols
            )));
        }
        if let Some(bad) = y.iter().find(|&&l| l > 1) {
            return Err(Error::SchemaMismatch(format!(
                "label {bad} is not 0 (real) or 1 (fake)"
            )));
        }
        Ok(Dataset {
            x,
            cols,
            y,
            sources,
            scheme,
            fingerprint,
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.cols..(i + 1) * self.cols]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// `[real, fake]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let fake = self.y.iter().filter(|&&l| l == 1).count();
        [self.y.len() - fake, fake]
    }

    /// New dataset holding `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Dataset {
            x,
            cols: self.cols,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            sources: indices.iter().map(|&i| self.sources[i].clone()).collect(),
            scheme: self.scheme,
            fingerprint: self.fingerprint.clone(),
        }
    }

    /// Copy with labels swapped (0 ↔ 1).
    pub fn with_flipped_labels(&self) -> Dataset {
        Dataset {
            y: self.y.iter().map(|l| 1 - l).collect(),
            ..self.clone()
        }
    }

    /// Appends `other` after checking that both describe the same features.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.fingerprint != self.fingerprint {
            return Err(Error::SchemaMismatch(format!(
                "fingerprint {} differs from {}",
                other.fingerprint, self.fingerprint
            )));
        }
        if other.cols != self.cols || other.scheme != self.scheme {
            return Err(Error::SchemaMismatch(format!(
                "{} ({} columns) cannot be appended to {} ({} columns)",
                other.scheme, other.cols, self.scheme, self.cols
            )));
        }
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
        self.sources.extend_from_slice(&other.sources);
        Ok(())
    }
}

/// What `prepare_dataset` read and skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareSummary {
    pub rows: [usize; 2],
    pub skipped: Vec<(PathBuf, String)>,
}

fn class_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads `<root>/real` and `<root>/fake` into one dataset. Rows are all real
/// images then all fake images, each class in lexicographic path order.
/// Files that fail to decode are logged and skipped; a class left without
/// rows is an error.
pub fn prepare_dataset(root: &Path, scheme: Scheme, params: &ExtractorParams) -> Result<(Dataset, PrepareSummary)> {
    params.validate(scheme)?;
    let mut jobs = Vec::new();
    for (label, name) in CLASS_DIRS.iter().enumerate() {
        let dir = root.join(name);
        if !dir.is_dir() {
            return Err(Error::EmptyClass(format!(
                "{name} (missing directory {})",
                dir.display()
            )));
        }
        jobs.extend(class_files(&dir)?.into_iter().map(|p| (label as u8, p)));
    }

    let results: Vec<_> = jobs
        .par_iter()
        .map(|(_, path)| extract_file(path, scheme, params))
        .collect();

    let cols = params.feature_len(scheme);
    let mut summary = PrepareSummary::default();
    let (mut x, mut y, mut sources) = (Vec::new(), Vec::new(), Vec::new());
    for ((label, path), result) in jobs.into_iter().zip(results) {
        match result {
            Ok(v) => {
                debug_assert_eq!(v.len(), cols);
                x.extend(v.into_values());
                y.push(label);
                let rel = path.strip_prefix(root).unwrap_or(&path);
                sources.push(rel.to_string_lossy().replace('\\', "/"));
                summary.rows[label as usize] += 1;
            }
            Err(e) if e.is_data_error() => {
                log::warn!("skipping {}: {e}", path.display());
                summary.skipped.push((path, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    for (label, name) in CLASS_DIRS.iter().enumerate() {
        if summary.rows[label] == 0 {
            return Err(Error::EmptyClass(name.to_string()));
        }
    }
    let ds = Dataset::new(x, cols, y, sources, scheme, params.fingerprint(scheme))?;
    Ok((ds, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{encode_pgm, GrayImage};

    fn write(dir: &Path, name: &str, seed: usize) {
        let img = GrayImage::from_fn(30, 30, |x, y| ((x * 7 + y * 13 + seed * 29) % 256) as f64).unwrap();
        fs::write(dir.join(name), encode_pgm(&img)).unwrap();
    }

    fn corpus(real: usize, fake: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, n) in [("real", real), ("fake", fake)] {
            let d = dir.path().join(name);
            fs::create_dir(&d).unwrap();
            for i in 0..n {
                write(&d, &format!("{i:03}.pgm"), i + n * 3);
            }
        }
        dir
    }

    #[test]
    fn rows_follow_class_then_path_order() {
        let dir = corpus(3, 2);
        let (ds, summary) = prepare_dataset(dir.path(), Scheme::Lbp, &ExtractorParams::default()).unwrap();
        assert_eq!(ds.rows(), 5);
        assert_eq!(ds.labels(), &[0, 0, 0, 1, 1]);
        assert_eq!(ds.sources()[0], "real/000.pgm");
        assert_eq!(ds.sources()[4], "fake/001.pgm");
        assert_eq!(summary.rows, [3, 2]);
        let (again, _) = prepare_dataset(dir.path(), Scheme::Lbp, &ExtractorParams::default()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn broken_files_are_skipped_and_counted() {
        let dir = corpus(2, 2);
        fs::write(dir.path().join("real/zz.pgm"), b"P5 broken").unwrap();
        fs::write(dir.path().join("real/notes.txt"), b"ignored").unwrap();
        let (ds, summary) = prepare_dataset(dir.path(), Scheme::Hog, &ExtractorParams::default()).unwrap();
        assert_eq!(ds.rows(), 4);
        assert_eq!(summary.skipped.len(), 1);
    }

    #[test]
    fn missing_or_empty_class_is_an_error() {
        let dir = corpus(2, 0);
        let err = prepare_dataset(dir.path(), Scheme::Hog, &ExtractorParams::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyClass(ref c) if c == "fake"), "{err}");
        fs::remove_dir(dir.path().join("fake")).unwrap();
        let err = prepare_dataset(dir.path(), Scheme::Hog, &ExtractorParams::default()).unwrap_err();
        assert!(err.to_string().contains("fake"));
    }

    #[test]
    fn extend_checks_the_fingerprint() {
        let a = Dataset::new(vec![1.0, 2.0], 2, vec![0], vec!["a".into()], Scheme::Hog, "f1".into()).unwrap();
        let mut b = a.clone();
        b.extend(&a).unwrap();
        assert_eq!(b.rows(), 2);
        let c = Dataset::new(vec![1.0, 2.0], 2, vec![1], vec!["c".into()], Scheme::Hog, "f2".into()).unwrap();
        assert!(matches!(b.extend(&c), Err(Error::SchemaMismatch(_))));
    }
}
