use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use depthnet::kernels::{
    dw_conv3x3, dw_deconv3x3_fast, dw_deconv3x3_naive, pw_conv, tiled_execute, KernelOp,
    TileConfig,
};
use depthnet::{quantize, QFormat};
use depthnet_bench::{dw_kernel, pw_kernel, tensor};

fn depthwise(c: &mut Criterion) {
    let x = tensor(64, 152, 64, 1);
    let k = dw_kernel(64, 2);
    let mut g = c.benchmark_group("dw_conv3x3");
    for stride in [1, 2] {
        g.bench_with_input(BenchmarkId::from_parameter(stride), &stride, |b, &s| {
            b.iter(|| dw_conv3x3(black_box(&x), &k, s).unwrap())
        });
    }
    g.finish();
}

fn pointwise(c: &mut Criterion) {
    let x = tensor(64, 152, 64, 3);
    let k = pw_kernel(64, 64, 4);
    let xq = quantize(&x, QFormat::FEATURE);
    let mut g = c.benchmark_group("pw_conv");
    g.bench_function("real", |b| b.iter(|| pw_conv(black_box(&x), &k, 1).unwrap()));
    g.bench_function("fixed", |b| b.iter(|| pw_conv(black_box(&xq), &k, 1).unwrap()));
    g.finish();
}

fn deconv(c: &mut Criterion) {
    let x = tensor(32, 76, 64, 5);
    let k = dw_kernel(64, 6);
    let mut g = c.benchmark_group("dw_deconv3x3");
    g.bench_function("fast", |b| b.iter(|| dw_deconv3x3_fast(black_box(&x), &k).unwrap()));
    g.bench_function("naive", |b| b.iter(|| dw_deconv3x3_naive(black_box(&x), &k).unwrap()));
    g.finish();
}

fn tiling(c: &mut Criterion) {
    let x = tensor(64, 152, 64, 7);
    let k = pw_kernel(64, 64, 8);
    let op = KernelOp::PwConv {
        kernel: &k,
        stride: 1,
        accum: None,
    };
    let mut g = c.benchmark_group("tiled_pw");
    for p in [1, 8, 32, 64] {
        let cfg = TileConfig::with_partition(p).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &cfg, |b, cfg| {
            b.iter(|| tiled_execute(black_box(&x), &op, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, depthwise, pointwise, deconv, tiling);
criterion_main!(benches);
