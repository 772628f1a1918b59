//! Shared inputs for the criterion benchmarks under `benches/`.

use depthnet::kernels::{DwKernel, PwKernel};
use depthnet::preprocess::{DepthMap, MapRole};
use depthnet::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(h: usize, w: usize, c: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    let data = (0..h * w * c).map(|_| r.gen_range(0.0..1.0)).collect();
    Tensor::from_real(h, w, c, data).unwrap()
}

pub fn dw_kernel(c: usize, seed: u64) -> DwKernel {
    let mut r = rng(seed);
    let taps = (0..9 * c).map(|_| r.gen_range(-1.0..1.0)).collect();
    let bias = (0..c).map(|_| r.gen_range(-0.1..0.1)).collect();
    DwKernel::new(c, taps, bias).unwrap()
}

pub fn pw_kernel(co: usize, ci: usize, seed: u64) -> PwKernel {
    let mut r = rng(seed);
    let taps = (0..co * ci).map(|_| r.gen_range(-1.0..1.0)).collect();
    let bias = (0..co).map(|_| r.gen_range(-0.1..0.1)).collect();
    PwKernel::new(co, ci, taps, bias).unwrap()
}

/// Sparse map with roughly `density` of its pixels set to 1..80 m.
pub fn sparse_map(h: usize, w: usize, density: f64, seed: u64) -> DepthMap {
    let mut r = rng(seed);
    let mut m = DepthMap::empty(h, w, MapRole::Sparse);
    for y in 0..h {
        for x in 0..w {
            if r.gen_bool(density) {
                m.set(y, x, r.gen_range(1_000..80_000));
            }
        }
    }
    m
}
