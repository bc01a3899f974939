//! Sequential vs rayon-parallel execution of the data-parallel stages.
//!
//! Without the `parallel` feature both variants run the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use modad::autoencoders::{fit_extractor, Architecture, ExtractorSpec, TrainConfig};
use modad::par::ExecMode;
use modad::pipeline::extract_features;
use modad::sim::{make_dataset, series_of, DatasetSpec};

fn spec() -> DatasetSpec {
    DatasetSpec {
        extractor_samples: 200,
        normal_samples: 100,
        mixed_samples: 150,
        test_samples: 60,
        ..DatasetSpec::default()
    }
}

fn modes(c: &mut Criterion) {
    let spec = spec();
    let split = make_dataset(&spec, ExecMode::Parallel).unwrap();
    let extractor = fit_extractor(
        &ExtractorSpec::new(Architecture::Cnn, spec.event.length, 48),
        &series_of(&split.extractor_train),
        &TrainConfig { max_epochs: 1, ..TrainConfig::default() },
    )
    .unwrap();

    let mut g = c.benchmark_group("generate");
    g.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| make_dataset(black_box(&spec), m).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("extract_features");
    g.sample_size(20);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| extract_features(&extractor, black_box(&split.extractor_train), m).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, modes);
criterion_main!(benches);
