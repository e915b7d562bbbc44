use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kazefuse::bench::bench_pipeline;
use kazefuse::fuse::{export_features, import_features, prepare_dataset, Dataset};
use kazefuse::image::{encode_pgm, load_image, ImageFormat};
use kazefuse::keyframe::{select_keyframes, FrameDecision, FrameSequence};
use kazefuse::learn::{evaluate, load_model, save_model, stratified_split, train, EvalReport, TrainedModel};
use kazefuse::synth::write_corpus;

use crate::args::{BenchArgs, EvalArgs, FeaturesArgs, KeyframesArgs, PipelineArgs, SynthArgs, TrainArgs};
use crate::config::{make_parent, sidecar, write_file, RunConfig};
use crate::dump;
use crate::error::CliError;

pub const EVAL_REPORT_VERSION: u32 = 1;

/// Decodable image files directly inside `dir`, sorted by path.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn keyframes(args: &KeyframesArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let k = &cfg.keyframes;
    let (seq, origin) = match (&args.frames, &args.manifest) {
        (Some(dir), _) => (FrameSequence::from_paths(image_files(dir)?, k.fps)?, dir),
        (None, Some(manifest)) => {
            let text = fs::read_to_string(manifest).map_err(|e| CliError::io(manifest, e))?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            (FrameSequence::from_manifest(&text, base, k.fps)?, manifest)
        }
        (None, None) => unreachable!("clap requires --frames or --manifest"),
    };
    if seq.is_empty() {
        return Err(CliError::Data(format!("no frames found in {}", origin.display())));
    }
    let selection = select_keyframes(&seq, &k.policy, load_image)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    for kf in &selection.keyframes {
        let path = args.out.join(format!("kf_{:06}.pgm", kf.index));
        write_file(&path, &encode_pgm(&kf.image))?;
    }
    let mut log = String::from("index\ttimestamp\tdecision\tsimilarity\tpath\n");
    for e in &selection.log {
        let decision = match e.decision {
            FrameDecision::SkippedHeadTail => "skipped_head_tail",
            FrameDecision::NotSampled => "not_sampled",
            FrameDecision::Kept => "kept",
            FrameDecision::Duplicate => "duplicate",
        };
        let sim = e.similarity.map_or_else(|| "-".to_string(), |s| s.to_string());
        let _ = writeln!(
            log,
            "{}\t{}\t{decision}\t{sim}\t{}",
            e.index,
            e.timestamp,
            e.path.display()
        );
    }
    write_file(&args.out.join("selection.tsv"), log.as_bytes())?;
    cfg.write(&args.out.join("config.toml"))?;
    println!(
        "kept {} of {} frames -> {}",
        selection.keyframes.len(),
        seq.len(),
        args.out.display()
    );
    Ok(())
}

pub fn features(args: &FeaturesArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, summary) = prepare_dataset(&args.corpus, cfg.scheme, &cfg.extractor)?;
    make_parent(&args.out)?;
    export_features(&ds, &args.out)?;
    cfg.write(&sidecar(&args.out))?;
    println!(
        "{} rows ({} real, {} fake) x {} columns, {} skipped -> {}",
        ds.rows(),
        summary.rows[0],
        summary.rows[1],
        ds.cols(),
        summary.skipped.len(),
        args.out.display()
    );
    for (path, reason) in &summary.skipped {
        eprintln!("skipped {}: {reason}", path.display());
    }
    if let Some(dir) = &args.dump_dir {
        let n = dump::write_dumps(&args.corpus, dir, args.dump_limit, cfg)?;
        println!("dumped {n} images -> {}", dir.display());
    }
    Ok(())
}

/// Carries scheme and extractor settings over from the feature file's own
/// config, when it has one that matches, so a model's config records how its
/// inputs were made.
fn inherit_extractor(cfg: &mut RunConfig, features: &Path, ds: &Dataset) {
    let path = sidecar(features);
    let Ok(text) = fs::read_to_string(&path) else {
        log::info!("no {} to inherit extractor settings from", path.display());
        return;
    };
    match toml::from_str::<RunConfig>(&text) {
        Ok(source) if source.extractor.fingerprint(ds.scheme()) == ds.fingerprint() => {
            cfg.scheme = ds.scheme();
            cfg.extractor = source.extractor;
        }
        _ => log::warn!(
            "{} does not describe {}; extractor settings not recorded",
            path.display(),
            features.display()
        ),
    }
}

fn train_model(ds: &Dataset, cfg: &RunConfig) -> Result<TrainedModel, CliError> {
    let model = train(ds, &cfg.train_config())?;
    if !model.meta.converged {
        log::warn!("SVC stopped at its iteration cap before converging");
    }
    Ok(model)
}

pub fn train_cmd(args: &TrainArgs, cfg: &mut RunConfig) -> Result<(), CliError> {
    let ds = import_features(&args.features)?;
    inherit_extractor(cfg, &args.features, &ds);
    let train_ds = match &args.test_out {
        Some(test_path) => {
            let (tr, te) = stratified_split(&ds, &cfg.split)?;
            make_parent(test_path)?;
            export_features(&te, test_path)?;
            println!("held out {} rows -> {}", te.rows(), test_path.display());
            tr
        }
        None => ds,
    };
    let model = train_model(&train_ds, cfg)?;
    make_parent(&args.model)?;
    save_model(&model, &args.model)?;
    cfg.write(&sidecar(&args.model))?;
    println!(
        "trained {} on {} rows in {:.2}s -> {}",
        model.kind,
        train_ds.rows(),
        model.meta.wall_time_secs,
        args.model.display()
    );
    Ok(())
}

/// `#` header lines, then the report as JSON.
pub fn eval_report_file(model: &TrainedModel, report: &EvalReport) -> String {
    let body = serde_json::json!({
        "scheme": model.scheme,
        "classifier": model.kind,
        "fingerprint": model.fingerprint,
        "report": report,
    });
    format!(
        "# kazefuse-eval {EVAL_REPORT_VERSION}\n# fingerprint {}\n{}\n",
        model.fingerprint,
        serde_json::to_string_pretty(&body).expect("report serializes")
    )
}

pub fn eval(args: &EvalArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let ds = import_features(&args.features)?;
    let report = evaluate(&model, &ds)?;
    println!("{} on {} ({} rows)", model.kind, args.features.display(), ds.rows());
    println!("{report}");
    if let Some(path) = &args.report {
        write_file(path, eval_report_file(&model, &report).as_bytes())?;
        cfg.write(&sidecar(path))?;
    }
    Ok(())
}

pub fn bench(args: &BenchArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let b = bench_pipeline(
        &args.corpus,
        cfg.scheme,
        &cfg.extractor,
        &cfg.split,
        &cfg.train_config(),
        cfg.bench.runs,
    )?;
    if args.table {
        println!("{}", b.table());
    } else {
        println!(
            "{} + {}: accuracy {:.4}, inference {:.4} ms/instance over {} runs",
            b.scheme,
            b.classifier,
            b.eval.accuracy,
            kazefuse::bench::nanos_to_secs(b.timing.per_instance_inference_time()) * 1e3,
            b.timing.runs
        );
    }
    if let Some(path) = &args.report {
        write_file(path, b.to_report_file().as_bytes())?;
        cfg.write(&sidecar(path))?;
    }
    if !b.eval_stable {
        return Err(CliError::Internal("evaluation changed between timed runs".into()));
    }
    Ok(())
}

pub fn pipeline(args: &PipelineArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let (ds, summary) = prepare_dataset(&args.corpus, cfg.scheme, &cfg.extractor)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    export_features(&ds, &out.join("features.csv"))?;
    println!(
        "features: {} rows ({} real, {} fake) x {} columns, {} skipped",
        ds.rows(),
        summary.rows[0],
        summary.rows[1],
        ds.cols(),
        summary.skipped.len()
    );
    let (tr, te) = stratified_split(&ds, &cfg.split)?;
    let model = train_model(&tr, cfg)?;
    save_model(&model, &out.join("model.kfm"))?;
    let report = evaluate(&model, &te)?;
    write_file(&out.join("eval.txt"), eval_report_file(&model, &report).as_bytes())?;
    cfg.write(&out.join("config.toml"))?;
    println!(
        "{} + {}: trained on {} rows, tested on {} rows",
        cfg.scheme,
        model.kind,
        tr.rows(),
        te.rows()
    );
    println!("{report}");
    Ok(())
}

pub fn synth(args: &SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    write_corpus(&args.out, &cfg.synth)?;
    cfg.write(&args.out.join("config.toml"))?;
    println!(
        "wrote {} real and {} fake images -> {}",
        cfg.synth.pairs,
        cfg.synth.pairs,
        args.out.display()
    );
    Ok(())
}
