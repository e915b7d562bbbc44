use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn kazefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kazefuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = kazefuse(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_pgm(path: &Path, w: usize, h: usize, px: impl Fn(usize, usize) -> u8) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            bytes.push(px(x, y));
        }
    }
    fs::write(path, bytes).unwrap();
}

/// Smooth ramps for real, fine checkerboards for fake.
fn separable_corpus(root: &Path, per_class: usize) {
    for class in ["real", "fake"] {
        fs::create_dir_all(root.join(class)).unwrap();
    }
    for i in 0..per_class {
        let off = (i * 7 % 60) as f64;
        write_pgm(&root.join(format!("real/r{i:03}.pgm")), 32, 32, |x, y| {
            (off + 4.0 * x as f64 + (y % 3) as f64).min(255.0) as u8
        });
        let cell = 1 + i % 2;
        let lo = (i * 5 % 40) as u8;
        write_pgm(&root.join(format!("fake/f{i:03}.pgm")), 32, 32, |x, y| {
            if (x / cell + y / cell) % 2 == 0 {
                lo
            } else {
                200 + (i % 50) as u8
            }
        });
    }
}

#[test]
fn identical_frames_collapse_to_one_keyframe() {
    let dir = TempDir::new().unwrap();
    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for i in 0..30 {
        write_pgm(&frames.join(format!("{i:04}.pgm")), 16, 16, |x, _| (x * 10) as u8);
    }
    let out = dir.path().join("kf");
    ok(&["keyframes", "--frames", s(&frames), "--out", s(&out), "--no-skip"]);
    let kept: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("kf_"))
        .collect();
    assert_eq!(kept.len(), 1);
    let log = fs::read_to_string(out.join("selection.tsv")).unwrap();
    assert!(log.starts_with("index\ttimestamp\tdecision\tsimilarity\tpath\n"));
    assert_eq!(log.matches("\tkept\t").count(), 1);
    assert!(out.join("config.toml").exists());
}

#[test]
fn empty_frame_directory_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = kazefuse(&[
        "keyframes",
        "--frames",
        s(dir.path()),
        "--out",
        s(&dir.path().join("kf")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("no frames found"), "{}", stderr(&out));
}

#[test]
fn feature_export_is_stable_and_sized_for_the_scheme() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 6);
    let a = dir.path().join("a/features.csv");
    let b = dir.path().join("b/features.csv");
    ok(&[
        "features",
        "--corpus",
        s(&corpus),
        "--out",
        s(&a),
        "--scheme",
        "hog+kaze",
    ]);
    ok(&[
        "features",
        "--corpus",
        s(&corpus),
        "--out",
        s(&b),
        "--scheme",
        "hog+kaze",
    ]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());

    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    // Header row plus one row per image; label and source precede the features.
    assert_eq!(rows.len(), 1 + 12);
    for row in &rows {
        assert_eq!(row.split(',').count(), 2 + 400, "{row}");
    }
    assert!(dir.path().join("a/features.csv.config.toml").exists());
}

#[test]
fn missing_class_directory_is_named() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 3);
    fs::remove_dir_all(corpus.join("fake")).unwrap();
    let out = kazefuse(&[
        "features",
        "--corpus",
        s(&corpus),
        "--out",
        s(&dir.path().join("f.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("fake"), "{}", stderr(&out));
}

#[test]
fn train_then_eval_separates_an_easy_corpus() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 25);
    let features = dir.path().join("features.csv");
    let test = dir.path().join("test.csv");
    let model = dir.path().join("model.kfm");
    let report = dir.path().join("eval.txt");
    ok(&[
        "features",
        "--corpus",
        s(&corpus),
        "--out",
        s(&features),
        "--scheme",
        "hog",
    ]);
    ok(&[
        "train",
        "--features",
        s(&features),
        "--model",
        s(&model),
        "--test-out",
        s(&test),
        "--classifier",
        "random-forest",
    ]);
    let model_text = fs::read(&model).unwrap();
    assert!(model_text.starts_with(b"KAZEFUSE-MODEL 1.0\n"));
    ok(&[
        "eval",
        "--model",
        s(&model),
        "--features",
        s(&test),
        "--report",
        s(&report),
    ]);

    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# kazefuse-eval 1"));
    assert!(lines.next().unwrap().starts_with("# fingerprint "));
    let body: serde_json::Value = serde_json::from_str(&lines.collect::<Vec<_>>().join("\n")).unwrap();
    let acc = body["report"]["accuracy"].as_f64().unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
    assert_eq!(body["report"]["n_test"].as_u64(), Some(10));

    let cfg = fs::read_to_string(dir.path().join("model.kfm.config.toml")).unwrap();
    assert!(cfg.contains("scheme = \"hog\""), "{cfg}");
    assert!(cfg.contains("kind = \"random_forest\""), "{cfg}");
}

#[test]
fn features_from_other_settings_are_refused() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 6);
    let f28 = dir.path().join("f28.csv");
    let f32 = dir.path().join("f32.csv");
    let model = dir.path().join("m.kfm");
    ok(&["features", "--corpus", s(&corpus), "--out", s(&f28), "--scheme", "hog"]);
    ok(&[
        "features",
        "--corpus",
        s(&corpus),
        "--out",
        s(&f32),
        "--scheme",
        "hog",
        "--hog-cell",
        "7",
    ]);
    ok(&[
        "train",
        "--features",
        s(&f28),
        "--model",
        s(&model),
        "--classifier",
        "extra-trees",
    ]);
    let out = kazefuse(&["eval", "--model", s(&model), "--features", s(&f32)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("hint:"), "{}", stderr(&out));
}

#[test]
fn bench_records_one_sample_per_run() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 10);
    let report = dir.path().join("bench.txt");
    ok(&[
        "bench",
        "--corpus",
        s(&corpus),
        "--runs",
        "3",
        "--scheme",
        "lbp+kaze",
        "--classifier",
        "gradient-boosting",
        "--rounds",
        "10",
        "--report",
        s(&report),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("# kazefuse-bench 1\n# fingerprint "));
    let json: String = text.lines().skip(2).collect::<Vec<_>>().join("\n");
    let body: serde_json::Value = serde_json::from_str(&json).unwrap();
    for phase in ["feature", "training", "inference"] {
        assert_eq!(body["timing"][phase]["samples"].as_array().unwrap().len(), 3, "{phase}");
    }
    assert_eq!(body["timing"]["runs"].as_u64(), Some(3));
    assert_eq!(body["computed"]["n_feature"].as_u64(), Some(20));
}

fn pipeline_outputs(corpus: &Path, out: &Path, threads: &str) -> Vec<(PathBuf, Vec<u8>)> {
    ok(&[
        "--threads",
        threads,
        "pipeline",
        "--corpus",
        s(corpus),
        "--out",
        s(out),
        "--classifier",
        "random-forest",
        "--trees",
        "25",
    ]);
    let mut files: Vec<_> = ["features.csv", "model.kfm", "eval.txt"]
        .iter()
        .map(|n| (PathBuf::from(n), fs::read(out.join(n)).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 12);
    let one = pipeline_outputs(&corpus, &dir.path().join("t1"), "1");
    let eight = pipeline_outputs(&corpus, &dir.path().join("t8"), "8");
    for ((name, a), (_, b)) in one.iter().zip(&eight) {
        // The model records training wall time, so compare it without meta.
        if name == Path::new("model.kfm") {
            let strip = |bytes: &[u8]| {
                let text = String::from_utf8(bytes.to_vec()).unwrap();
                let mut v: serde_json::Value = serde_json::from_str(text.split_once('\n').unwrap().1).unwrap();
                v.as_object_mut().unwrap().remove("meta");
                v
            };
            assert_eq!(strip(a), strip(b));
        } else {
            assert_eq!(a, b, "{}", name.display());
        }
    }
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    separable_corpus(&corpus, 3);
    let out = kazefuse(&["features", "--corpus", s(&corpus), "--out", "x.csv", "--scheme", "sift"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kazefuse(&[
        "train",
        "--features",
        "x.csv",
        "--model",
        "m.kfm",
        "--classifier",
        "svc",
        "--trees",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "sed = 1\n").unwrap();
    let out = kazefuse(&["--config", s(&bad), "synth", "--out", s(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flags_land_in_the_written_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 9\n[synth]\npairs = 4\nsize = 20\npatch = 6\n").unwrap();
    let out = dir.path().join("synth");
    ok(&["--config", s(&cfg), "synth", "--out", s(&out)]);
    assert_eq!(fs::read_dir(out.join("real")).unwrap().count(), 4);
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("seed = 9"), "{written}");
    assert!(written.contains("pairs = 4"), "{written}");

    // Feeding the written config back reproduces the corpus.
    let again = dir.path().join("again");
    ok(&["--config", s(&out.join("config.toml")), "synth", "--out", s(&again)]);
    for class in ["real", "fake"] {
        assert_eq!(
            fs::read(out.join(class).join("0000.pgm")).unwrap(),
            fs::read(again.join(class).join("0000.pgm")).unwrap()
        );
    }
}
