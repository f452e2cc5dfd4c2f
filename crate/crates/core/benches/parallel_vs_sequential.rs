//! One-thread pool versus the default pool on the parallel hot paths. Build
//! with `--no-default-features` to time the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sentcast::models::*;
use sentcast::parallel::with_jobs;
use sentcast::selfcheck::check_tft_dmse;
use sentcast::synthetic::{latent_sentiment_panels, seasonal_panel, LatentSentiment};

fn pools() -> [(&'static str, usize); 2] {
    [("one_thread", 1), ("default_pool", 0)]
}

fn training_epoch(c: &mut Criterion) {
    let spec = LatentSentiment { len: 120, ..LatentSentiment::default() };
    let panels = latent_sentiment_panels(2, &spec, 1);
    let set = build_windows(&panels, FeatureSet::Hlovs, 5, 3, 0.8).unwrap();
    let cfg = TrainConfig {
        lookback: 5,
        hidden_size: 16,
        hidden_continuous_size: 8,
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("tft_lite_epoch");
    group.sample_size(10);
    for (label, jobs) in pools() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                with_jobs(jobs, || {
                    let mut m = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlovs, 2, cfg.clone()).unwrap();
                    train_model(&mut m, &set.train).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let panels = vec![seasonal_panel("SEA", 160, 12, 0.5, 1)];
    let space = GridSpace {
        lookback: vec![5, 10, 15],
        batch_size: vec![16, 32],
        ..GridSpace::default()
    };
    let settings = GridSettings {
        kind: ModelKind::NLinear,
        feature_set: FeatureSet::Hlov,
        test_split: 0.8,
        validation: 0.25,
    };
    let base = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let mut group = c.benchmark_group("nlinear_grid");
    group.sample_size(10);
    for (label, jobs) in pools() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| with_jobs(jobs, || grid_search(&space, &base, &panels, &settings).unwrap()))
        });
    }
    group.finish();
}

fn gradcheck(c: &mut Criterion) {
    let mut group = c.benchmark_group("tft_gradcheck");
    group.sample_size(10);
    for (label, jobs) in pools() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| with_jobs(jobs, || check_tft_dmse(0).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, training_epoch, grid, gradcheck);
criterion_main!(benches);
