//! Scalar arithmetic shared by the kernel loops. A lane fixes the element
//! type, the accumulator type and how an accumulator becomes an output.

use crate::kernels::{quantize_all, MulCounter};
use crate::tensor::{requantize, round_shift, QFormat, Tensor, TensorData};

pub(crate) trait Lane: Sync {
    type E: Copy + Default + Send + Sync;
    type A: Copy + Send + Sync;

    fn zero(&self) -> Self::A;
    fn mac(&self, acc: Self::A, x: Self::E, w: Self::E) -> Self::A;
    fn finish(&self, acc: Self::A, bias: Self::E) -> Self::E;
}

pub(crate) struct RealLane;

impl Lane for RealLane {
    type E = f64;
    type A = f64;

    #[inline(always)]
    fn zero(&self) -> f64 {
        0.0
    }

    #[inline(always)]
    fn mac(&self, acc: f64, x: f64, w: f64) -> f64 {
        acc + x * w
    }

    #[inline(always)]
    fn finish(&self, acc: f64, bias: f64) -> f64 {
        acc + bias
    }
}

/// Double-width exact accumulation with a single requantization per output.
pub(crate) struct ExactFixedLane {
    pub format: QFormat,
}

impl Lane for ExactFixedLane {
    type E = i32;
    type A = i64;

    #[inline(always)]
    fn zero(&self) -> i64 {
        0
    }

    #[inline(always)]
    fn mac(&self, acc: i64, x: i32, w: i32) -> i64 {
        acc + x as i64 * w as i64
    }

    #[inline(always)]
    fn finish(&self, acc: i64, bias: i32) -> i32 {
        let f = self.format.frac_bits();
        let total = acc + ((bias as i64) << f);
        requantize(total, 2 * f, self.format) as i32
    }
}

/// Products rounded into a dedicated accumulator format and summed with
/// saturation, as the pointwise block does.
pub(crate) struct AccumFixedLane {
    pub feature: QFormat,
    pub accum: QFormat,
}

impl Lane for AccumFixedLane {
    type E = i32;
    type A = i64;

    #[inline(always)]
    fn zero(&self) -> i64 {
        0
    }

    #[inline(always)]
    fn mac(&self, acc: i64, x: i32, w: i32) -> i64 {
        let product = x as i64 * w as i64;
        let shift = 2 * self.feature.frac_bits() as i32 - self.accum.frac_bits() as i32;
        self.accum.saturate(acc + round_shift(product, shift))
    }

    #[inline(always)]
    fn finish(&self, acc: i64, bias: i32) -> i32 {
        let shift = self.feature.frac_bits() as i32 - self.accum.frac_bits() as i32;
        let total = self.accum.saturate(acc + round_shift(bias as i64, shift));
        requantize(total, self.accum.frac_bits(), self.feature) as i32
    }
}

/// Wraps a lane and counts every multiplication.
pub(crate) struct Counting<'a, L> {
    pub inner: L,
    pub counter: &'a MulCounter,
}

impl<L: Lane> Lane for Counting<'_, L> {
    type E = L::E;
    type A = L::A;

    fn zero(&self) -> Self::A {
        self.inner.zero()
    }

    fn mac(&self, acc: Self::A, x: Self::E, w: Self::E) -> Self::A {
        self.counter.add(1);
        self.inner.mac(acc, x, w)
    }

    fn finish(&self, acc: Self::A, bias: Self::E) -> Self::E {
        self.inner.finish(acc, bias)
    }
}

/// A kernel loop written once for every lane.
pub(crate) trait KernelBody {
    fn run<L: Lane>(&self, lane: &L, x: &[L::E], taps: &[L::E], bias: &[L::E]) -> Vec<L::E>;
}

/// Run `body` in the tensor's own arithmetic: real, or exact double-width
/// fixed point with taps quantized into the tensor's format.
pub(crate) fn dispatch_exact<B: KernelBody>(
    body: &B,
    x: &Tensor,
    taps: &[f64],
    bias: &[f64],
    counter: Option<&MulCounter>,
) -> TensorData {
    match (x.data(), counter) {
        (TensorData::Real(v), None) => TensorData::Real(body.run(&RealLane, v, taps, bias)),
        (TensorData::Real(v), Some(counter)) => {
            let lane = Counting {
                inner: RealLane,
                counter,
            };
            TensorData::Real(body.run(&lane, v, taps, bias))
        }
        (TensorData::Fixed { raw, format }, counter) => {
            let qt = quantize_all(taps, *format);
            let qb = quantize_all(bias, *format);
            let inner = ExactFixedLane { format: *format };
            let out = match counter {
                None => body.run(&inner, raw, &qt, &qb),
                Some(counter) => body.run(&Counting { inner, counter }, raw, &qt, &qb),
            };
            TensorData::Fixed {
                raw: out,
                format: *format,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_lane_rounds_once() {
        let q = QFormat::FEATURE;
        let lane = ExactFixedLane { format: q };
        // 0.5 * 0.5 + 0.25 bias = 0.5
        let acc = lane.mac(lane.zero(), 128, 128);
        assert_eq!(lane.finish(acc, 64), 128);
    }

    #[test]
    fn accum_lane_saturates_at_accumulator() {
        let feature = QFormat::new(8, 4).unwrap();
        let accum = QFormat::new(16, 8).unwrap();
        let lane = AccumFixedLane { feature, accum };
        let mut acc = lane.zero();
        for _ in 0..1000 {
            acc = lane.mac(acc, 127, 127);
        }
        assert_eq!(acc, accum.max_raw());
        assert_eq!(lane.finish(acc, 0) as i64, feature.max_raw());
    }
}
