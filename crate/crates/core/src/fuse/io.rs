//! Feature files: `#`-prefixed header lines followed by CSV.
//!
//! ```text
//! # kazefuse-features 1
//! # scheme hog+kaze
//! # fingerprint 3f9c…
//! # rows 954
//! # cols 400
//! label,source,f0,f1,…
//! 0,real/0001.png,0.0123,…
//! ```
//!
//! Values use the shortest decimal form that parses back to the same `f64`,
//! so a round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Scheme};
use crate::error::{Error, Result};

pub const FEATURE_FILE_VERSION: u32 = 1;
const MAGIC: &str = "kazefuse-features";

struct Header {
    scheme: Scheme,
    fingerprint: String,
    rows: usize,
    cols: usize,
}

fn render(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {MAGIC} {FEATURE_FILE_VERSION}").expect("write to Vec");
    writeln!(out, "# scheme {}", ds.scheme()).expect("write to Vec");
    writeln!(out, "# fingerprint {}", ds.fingerprint()).expect("write to Vec");
    writeln!(out, "# rows {}", ds.rows()).expect("write to Vec");
    writeln!(out, "# cols {}", ds.cols()).expect("write to Vec");
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["label".to_string(), "source".to_string()];
    head.extend((0..ds.cols()).map(|j| format!("f{j}")));
    let csv_err = |e: csv::Error| Error::MalformedFile(format!("cannot write feature CSV: {e}"));
    w.write_record(&head).map_err(csv_err)?;
    for i in 0..ds.rows() {
        let mut rec = vec![ds.labels()[i].to_string(), ds.sources()[i].clone()];
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::MalformedFile(format!("cannot flush feature CSV: {e}")))
}

pub fn export_features(ds: &Dataset, path: &Path) -> Result<()> {
    let bytes = render(ds)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Header> {
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::SchemaMismatch(format!("feature header ends before `{key}`")))?;
        let rest = line
            .strip_prefix("# ")
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix(' '))
            .ok_or_else(|| Error::SchemaMismatch(format!("expected `# {key} …`, found `{line}`")))?;
        Ok(rest.trim().to_string())
    };
    let version = field(MAGIC)?;
    if version != FEATURE_FILE_VERSION.to_string() {
        return Err(Error::SchemaMismatch(format!(
            "feature file version {version}, this build reads {FEATURE_FILE_VERSION}"
        )));
    }
    let scheme: Scheme = field("scheme")?
        .parse()
        .map_err(|e: Error| Error::SchemaMismatch(e.to_string()))?;
    let fingerprint = field("fingerprint")?;
    let count = |s: String, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::SchemaMismatch(format!("bad {what} count `{s}`")))
    };
    let rows = count(field("rows")?, "row")?;
    let cols = count(field("cols")?, "column")?;
    Ok(Header {
        scheme,
        fingerprint,
        rows,
        cols,
    })
}

pub fn import_features(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = parse_header(&mut lines)?;
    let body = text.splitn(6, '\n').nth(5).unwrap_or("");

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let bad = |msg: String| Error::SchemaMismatch(format!("{}: {msg}", path.display()));
    let names = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if names.len() != header.cols + 2 {
        return Err(bad(format!(
            "header declares {} columns but the table has {}",
            header.cols,
            names.len().saturating_sub(2)
        )));
    }
    let (mut x, mut y, mut sources) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.cols + 2 {
            return Err(bad(format!("row {i} has {} fields", rec.len())));
        }
        let label = rec[0]
            .parse::<u8>()
            .map_err(|_| bad(format!("row {i}: bad label `{}`", &rec[0])))?;
        y.push(label);
        sources.push(rec[1].to_string());
        for v in rec.iter().skip(2) {
            x.push(v.parse::<f64>().map_err(|_| bad(format!("row {i}: bad value `{v}`")))?);
        }
    }
    if y.len() != header.rows {
        return Err(bad(format!("header declares {} rows, found {}", header.rows, y.len())));
    }
    Dataset::new(x, header.cols, y, sources, header.scheme, header.fingerprint)
}

/// Appends `ds` to the feature file at `path`, creating it when absent.
pub fn append_features(ds: &Dataset, path: &Path) -> Result<()> {
    if !path.exists() {
        return export_features(ds, path);
    }
    let mut existing = import_features(path)?;
    existing.extend(ds)?;
    export_features(&existing, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(fp: &str) -> Dataset {
        Dataset::new(
            vec![0.1, 1.0 / 3.0, -0.0, 1e-300, f64::MAX, 2.5],
            3,
            vec![0, 1],
            vec!["real/a.png".into(), "fake/b, with comma.png".into()],
            Scheme::LbpKaze,
            fp.into(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let ds = sample("abc");
        export_features(&ds, &path).unwrap();
        let back = import_features(&path).unwrap();
        assert_eq!(back, ds);
        let bits = |d: &Dataset| d.x().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ds));
    }

    #[test]
    fn version_and_fingerprint_guards() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        export_features(&sample("abc"), &path).unwrap();
        append_features(&sample("abc"), &path).unwrap();
        assert_eq!(import_features(&path).unwrap().rows(), 4);
        assert!(matches!(
            append_features(&sample("xyz"), &path),
            Err(Error::SchemaMismatch(_))
        ));

        let text = fs::read_to_string(&path)
            .unwrap()
            .replacen("features 1", "features 2", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(import_features(&path), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn truncated_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        export_features(&sample("abc"), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(6).collect();
        fs::write(&path, cut.join("\n")).unwrap();
        assert!(matches!(import_features(&path), Err(Error::SchemaMismatch(_))));
    }
}
