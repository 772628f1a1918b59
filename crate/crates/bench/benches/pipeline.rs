use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use depthnet::graph::{build_depthnet_sized, Model, Weights};
use depthnet::preprocess::{
    dt_fill, normalize, run_pipeline, synthetic_plane_scene, Calibration, PipelineConfig,
    DEFAULT_SCALE_MM,
};
use depthnet::Precision;
use depthnet_bench::sparse_map;

fn distance_transform(c: &mut Criterion) {
    let mut g = c.benchmark_group("dt_fill");
    for side in [64, 128, 256, 512] {
        let m = sparse_map(side, side, 0.05, side as u64);
        g.bench_with_input(BenchmarkId::from_parameter(side), &m, |b, m| {
            b.iter(|| dt_fill(black_box(m)).unwrap())
        });
    }
    g.finish();
}

fn small_forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_64x128");
    g.sample_size(10);
    let input = normalize(&dt_fill(&sparse_map(64, 128, 0.1, 9)).unwrap(), DEFAULT_SCALE_MM).unwrap();
    for (name, ds, precision) in [
        ("std_real", false, Precision::Real),
        ("ds_real", true, Precision::Real),
        ("ds_fixed", true, Precision::default_fixed()),
    ] {
        let net = build_depthnet_sized(ds, 64, 128).unwrap();
        let model = Model::new(&net, &Weights::random_init(&net, 0), precision).unwrap();
        g.bench_function(name, |b| b.iter(|| model.forward(black_box(&input)).unwrap()));
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline_64x128");
    g.sample_size(10);
    let net = build_depthnet_sized(true, 64, 128).unwrap();
    let model = Model::new(&net, &Weights::random_init(&net, 0), Precision::Real).unwrap();
    let calib = Calibration::kitti_like(1242, 375);
    let cloud = synthetic_plane_scene(20.0, 64, 1200);
    let cfg = PipelineConfig::default();
    g.bench_function("ds_real", |b| {
        b.iter(|| run_pipeline(black_box(&cloud), &calib, &model, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, distance_transform, small_forward, pipeline);
criterion_main!(benches);
