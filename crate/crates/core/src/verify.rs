//! Seeded self-checks of the kernels and the distance transform against
//! their reference implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{build_depthnet, count_params, LayerOp};
use crate::kernels::{
    dw_deconv3x3_fast, dw_deconv3x3_naive, tiled_execute, DwKernel, KernelOp, PwKernel, TileConfig,
};
use crate::preprocess::{dt_fill, dt_fill_brute_force, DepthMap, MapRole};
use crate::tensor::{quantize, Dtype, QFormat, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cases: usize,
    /// Perturb the reference deconvolution so the suite must fail.
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            cases: 1000,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Vec<SuiteResult> {
    vec![
        verify_deconv(cfg),
        verify_tiling(cfg),
        verify_dt(cfg),
        verify_ds_ratio(),
    ]
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn random_dw(rng: &mut ChaCha8Rng, c: usize) -> DwKernel {
    DwKernel::new(c, uniform(rng, 9 * c, -1.0, 1.0), uniform(rng, c, -0.1, 0.1)).expect("sizes")
}

fn perturb(t: &mut Tensor) {
    let step = match t.dtype() {
        Dtype::Real => 1e-6,
        Dtype::Fixed(f) => f.resolution(),
    };
    let v = t.get(0, 0, 0);
    t.set(0, 0, 0, v + step);
}

/// Zero-skipping deconvolution against the zero-interleaved reference, in
/// real and fixed arithmetic.
pub fn verify_deconv(cfg: &VerifyConfig) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut r = SuiteResult::new("deconv fast == naive");
    for case in 0..cfg.cases {
        let (h, w, c) = (rng.gen_range(1..=64), rng.gen_range(1..=64), rng.gen_range(1..=8));
        let x = Tensor::from_real(h, w, c, uniform(&mut rng, h * w * c, -1.0, 1.0)).expect("sizes");
        let k = random_dw(&mut rng, c);
        for input in [x.clone(), quantize(&x, QFormat::FEATURE)] {
            let fast = dw_deconv3x3_fast(&input, &k);
            let naive = dw_deconv3x3_naive(&input, &k).map(|mut t| {
                if cfg.inject_fault {
                    perturb(&mut t);
                }
                t
            });
            let ok = matches!((&fast, &naive), (Ok(a), Ok(b)) if a == b);
            r.record(ok, || format!("case {case}: {h}x{w}x{c} {:?}", input.dtype()));
        }
    }
    r
}

/// Channel-tiled execution against a single tile, for every kernel type and
/// partition in {1, 2, 4, 8, 32}.
pub fn verify_tiling(cfg: &VerifyConfig) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7411);
    let mut r = SuiteResult::new("tiled == untiled");
    for case in 0..cfg.cases.div_ceil(10).max(1) {
        let (h, w) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
        let (c, co) = (rng.gen_range(1..=40), rng.gen_range(1..=16));
        let x = Tensor::from_real(h, w, c, uniform(&mut rng, h * w * c, -1.0, 1.0)).expect("sizes");
        let dw = random_dw(&mut rng, c);
        let pw = PwKernel::new(co, c, uniform(&mut rng, co * c, -1.0, 1.0), uniform(&mut rng, co, -0.1, 0.1))
            .expect("sizes");
        let stride = rng.gen_range(1..=2);
        let ops = [
            KernelOp::DwConv { kernel: &dw, stride },
            KernelOp::PwConv { kernel: &pw, stride, accum: None },
            KernelOp::DwDeconv { kernel: &dw },
        ];
        for input in [x.clone(), quantize(&x, QFormat::FEATURE)] {
            for op in &ops {
                let whole = op.apply(&input);
                for p in [1, 2, 4, 8, 32] {
                    let cfg = TileConfig::with_partition(p).expect("positive partition");
                    let tiled = tiled_execute(&input, op, &cfg);
                    let ok = matches!((&whole, &tiled), (Ok(a), Ok(b)) if a == b);
                    r.record(ok, || format!("case {case}: {h}x{w}x{c} partition {p} {op:?}"));
                }
            }
        }
    }
    r
}

/// Two-pass distance transform against the quadratic nearest-neighbor scan.
pub fn verify_dt(cfg: &VerifyConfig) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD7);
    let mut r = SuiteResult::new("dt == brute force");
    for case in 0..cfg.cases.div_ceil(10).max(1) {
        let (h, w) = (rng.gen_range(1..=64), rng.gen_range(1..=48));
        let density = rng.gen_range(0.01..0.20);
        let mut values: Vec<u32> = (0..h * w)
            .map(|_| if rng.gen_bool(density) { rng.gen_range(1..80_000) } else { 0 })
            .collect();
        if values.iter().all(|&v| v == 0) {
            let i = rng.gen_range(0..values.len());
            values[i] = 1;
        }
        let m = DepthMap::new(h, w, values, MapRole::Sparse).expect("sizes");
        let ok = matches!(
            (dt_fill(&m), dt_fill_brute_force(&m)),
            (Ok(a), Ok(b)) if a == b
        );
        r.record(ok, || format!("case {case}: {h}x{w} density {density:.3}"));
    }
    r
}

/// Per-layer separable/standard tap ratio is exactly `1/Co + 1/9`, and the
/// whole-network reduction factor lies in [6, 8.5].
pub fn verify_ds_ratio() -> SuiteResult {
    let mut r = SuiteResult::new("ds ratio identity");
    let (std_net, ds_net) = (build_depthnet(false), build_depthnet(true));
    for (s, d) in std_net.layers().iter().zip(ds_net.layers()) {
        let co = match s.op {
            LayerOp::Conv3x3 { n, .. } | LayerOp::Deconv3x3 { n, .. } => n,
            LayerOp::Conv1x1 { .. } => continue,
        };
        // taps_ds / taps_std == 1/co + 1/9  <=>  9·co·taps_ds == (9 + co)·taps_std
        let ok = 9 * co * d.taps() == (9 + co) * s.standard_taps() && s.path == d.path;
        r.record(ok, || format!("{}: {} vs {}", s.path, d.taps(), s.standard_taps()));
    }
    let factor = count_params(&std_net) as f64 / count_params(&ds_net) as f64;
    r.record((6.0..=8.5).contains(&factor), || format!("network factor {factor:.3}"));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        let cfg = VerifyConfig {
            seed: 7,
            cases: 40,
            inject_fault: false,
        };
        for s in run_all(&cfg) {
            assert!(s.passed(), "{s:?}");
        }
    }

    #[test]
    fn fault_is_detected() {
        let cfg = VerifyConfig {
            seed: 1,
            cases: 5,
            inject_fault: true,
        };
        let s = verify_deconv(&cfg);
        assert_eq!(s.failures, s.cases);
        assert!(s.first_failure.is_some());
    }

    #[test]
    fn seeded() {
        let cfg = VerifyConfig {
            seed: 3,
            cases: 20,
            inject_fault: false,
        };
        assert_eq!(run_all(&cfg), run_all(&cfg));
    }
}
