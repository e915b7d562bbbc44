use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kazefuse::fuse::Scheme;
use kazefuse::learn::{train, ClassifierKind, TrainConfig};
use kazefuse_bench::synthetic_dataset;

const PAIRS: usize = 100;

fn classifiers(c: &mut Criterion) {
    let ds = synthetic_dataset(Scheme::LbpKaze, PAIRS).expect("synthetic dataset");
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    for kind in ClassifierKind::ALL {
        let config = TrainConfig {
            classifier: kind.default_spec(),
            ..TrainConfig::default()
        };
        group.bench_function(format!("train/{}", kind.name()), |b| {
            b.iter(|| black_box(train(&ds, &config).expect("trains")))
        });
        let model = train(&ds, &config).expect("trains");
        group.bench_function(format!("predict/{}", kind.name()), |b| {
            let mut r = 0;
            b.iter(|| {
                let row = ds.row(r % ds.rows());
                r += 1;
                black_box(model.predict(black_box(row)).expect("predicts"))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, classifiers);
criterion_main!(benches);
