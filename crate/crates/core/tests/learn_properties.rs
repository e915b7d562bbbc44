use kazefuse::fuse::{Dataset, Scheme};
use kazefuse::learn::{
    evaluate, model_from_bytes, model_to_bytes, train, ClassifierKind, ClassifierSpec, ForestParams, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two overlapping Gaussian-ish clouds; continuous values, so no two rows
/// coincide.
fn clouds(rows: usize, cols: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(rows * cols);
    let mut y = Vec::with_capacity(rows);
    for i in 0..rows {
        let label = u8::from(i % 2 == 1);
        let shift = if label == 1 { 0.8 } else { -0.8 };
        for _ in 0..cols {
            let v: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum();
            x.push(v + shift);
        }
        y.push(label);
    }
    let sources = (0..rows).map(|i| format!("{i}.png")).collect();
    Dataset::new(x, cols, y, sources, Scheme::Hog, "fp".into()).unwrap()
}

/// Default hyperparameters, with an odd forest size so votes cannot tie.
fn spec(kind: ClassifierKind) -> ClassifierSpec {
    let forest = ForestParams {
        n_trees: 51,
        ..Default::default()
    };
    match kind {
        ClassifierKind::RandomForest => ClassifierSpec::RandomForest(forest),
        ClassifierKind::ExtraTrees => ClassifierSpec::ExtraTrees(forest),
        other => other.default_spec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flipping_labels_swaps_the_confusion_roles(seed in any::<u64>(), standardize in any::<bool>()) {
        let train_ds = clouds(80, 4, seed);
        let test_ds = clouds(40, 4, seed ^ 0x5eed);
        for kind in ClassifierKind::ALL {
            let config = TrainConfig { classifier: spec(kind), standardize, seed };
            let a = evaluate(&train(&train_ds, &config).unwrap(), &test_ds).unwrap();
            let b = evaluate(
                &train(&train_ds.with_flipped_labels(), &config).unwrap(),
                &test_ds.with_flipped_labels(),
            )
            .unwrap();
            let (ca, cb) = (a.confusion, b.confusion);
            prop_assert_eq!((cb.tp, cb.tn, cb.fp, cb.fn_), (ca.tn, ca.tp, ca.fn_, ca.fp), "{}", kind);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }
    }
}

#[test]
fn saved_models_predict_identically() {
    let ds = clouds(120, 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let probes: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..6).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    for kind in ClassifierKind::ALL {
        for standardize in [false, true] {
            let config = TrainConfig {
                classifier: kind.default_spec(),
                standardize,
                seed: 9,
            };
            let model = train(&ds, &config).unwrap();
            let restored = model_from_bytes(&model_to_bytes(&model).unwrap()).unwrap();
            assert_eq!(restored, model, "{kind}");
            for p in &probes {
                assert_eq!(model.predict(p).unwrap(), restored.predict(p).unwrap(), "{kind}");
            }
        }
    }
}

#[test]
fn same_seed_same_model_different_seed_different_forest() {
    let ds = clouds(100, 5, 8);
    let config = |seed| TrainConfig {
        classifier: ClassifierKind::RandomForest.default_spec(),
        standardize: false,
        seed,
    };
    let (a, b, c) = (
        train(&ds, &config(1)).unwrap(),
        train(&ds, &config(1)).unwrap(),
        train(&ds, &config(2)).unwrap(),
    );
    assert_eq!(a.state, b.state);
    assert_ne!(a.state, c.state);
}
