use rayon::prelude::*;

use super::lane::{AccumFixedLane, Lane, RealLane};
use super::{check_channels, check_stride, quantize_all, strided_len, PwKernel};
use crate::error::{Error, Result};
use crate::tensor::{QFormat, Tensor, TensorData};

/// Partial sums of a pointwise convolution, carried across input-channel
/// tiles. Real mode sums in `f64`; fixed mode sums in the accumulator format.
pub(crate) struct PwAccumulator<'k> {
    kernel: &'k PwKernel,
    out_height: usize,
    out_width: usize,
    stride: usize,
    state: AccState,
}

enum AccState {
    Real(Vec<f64>),
    Fixed {
        lane: AccumFixedLane,
        taps: Vec<i32>,
        acc: Vec<i64>,
    },
}

fn accumulate<L: Lane>(
    lane: &L,
    acc: &mut [L::A],
    x: &Tensor,
    xs: &[L::E],
    taps: &[L::E],
    kernel: &PwKernel,
    stride: usize,
    out_width: usize,
    channel_offset: usize,
) {
    let (_, w, tile) = x.shape();
    let (co, ci) = (kernel.out_channels(), kernel.in_channels());
    acc.par_chunks_mut(out_width * co)
        .enumerate()
        .for_each(|(oy, row)| {
            for ox in 0..out_width {
                let base = ((oy * stride) * w + ox * stride) * tile;
                let pixel = &xs[base..base + tile];
                for o in 0..co {
                    let k = &taps[o * ci + channel_offset..o * ci + channel_offset + tile];
                    let slot = &mut row[ox * co + o];
                    let mut a = *slot;
                    for (&v, &t) in pixel.iter().zip(k) {
                        a = lane.mac(a, v, t);
                    }
                    *slot = a;
                }
            }
        });
}

impl<'k> PwAccumulator<'k> {
    /// `input_shape` is the full (untiled) input; `accum` selects the
    /// accumulator format for fixed-point inputs of format `feature`.
    pub(crate) fn new(
        kernel: &'k PwKernel,
        height: usize,
        width: usize,
        stride: usize,
        fixed: Option<(QFormat, QFormat)>,
    ) -> Result<Self> {
        check_stride(stride)?;
        let (oh, ow) = (strided_len(height, stride), strided_len(width, stride));
        let n = oh * ow * kernel.out_channels();
        let state = match fixed {
            None => AccState::Real(vec![0.0; n]),
            Some((feature, accum)) => AccState::Fixed {
                lane: AccumFixedLane { feature, accum },
                taps: quantize_all(kernel.taps(), feature),
                acc: vec![0; n],
            },
        };
        Ok(PwAccumulator {
            kernel,
            out_height: oh,
            out_width: ow,
            stride,
            state,
        })
    }

    /// Fold input channels `[offset, offset + x.channels())` into the sums.
    pub(crate) fn accumulate(&mut self, x: &Tensor, channel_offset: usize) -> Result<()> {
        if channel_offset + x.channels() > self.kernel.in_channels() {
            return Err(Error::Dimension(format!(
                "channel tile {}..{} exceeds {} input channels",
                channel_offset,
                channel_offset + x.channels(),
                self.kernel.in_channels()
            )));
        }
        let (kernel, stride, ow) = (self.kernel, self.stride, self.out_width);
        match (&mut self.state, x.data()) {
            (AccState::Real(acc), TensorData::Real(xs)) => accumulate(
                &RealLane,
                acc,
                x,
                xs,
                kernel.taps(),
                kernel,
                stride,
                ow,
                channel_offset,
            ),
            (AccState::Fixed { lane, taps, acc }, TensorData::Fixed { raw, format })
                if *format == lane.feature =>
            {
                accumulate(&*lane, acc, x, raw, taps, kernel, stride, ow, channel_offset)
            }
            _ => {
                return Err(Error::Dimension(format!(
                    "pointwise tile dtype {:?} does not match accumulator",
                    x.dtype()
                )))
            }
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Tensor {
        let co = self.kernel.out_channels();
        let (oh, ow) = (self.out_height, self.out_width);
        let data = match self.state {
            AccState::Real(acc) => {
                let bias = self.kernel.bias();
                TensorData::Real(
                    acc.iter()
                        .enumerate()
                        .map(|(i, &a)| RealLane.finish(a, bias[i % co]))
                        .collect(),
                )
            }
            AccState::Fixed { lane, acc, .. } => {
                let bias = quantize_all(self.kernel.bias(), lane.feature);
                TensorData::Fixed {
                    raw: acc
                        .iter()
                        .enumerate()
                        .map(|(i, &a)| lane.finish(a, bias[i % co]))
                        .collect(),
                    format: lane.feature,
                }
            }
        };
        Tensor::new_unchecked(oh, ow, co, data)
    }
}

/// 1×1 convolution. Stride 2 samples even coordinates. Fixed-point inputs
/// accumulate in the feature format's default accumulator.
pub fn pw_conv(x: &Tensor, k: &PwKernel, stride: usize) -> Result<Tensor> {
    let accum = x.as_raw().map(|(_, format)| format.default_accumulator());
    pw_conv_impl(x, k, stride, accum)
}

/// 1×1 convolution with an explicit accumulator format. Ignored for real
/// inputs.
pub fn pw_conv_with_accumulator(
    x: &Tensor,
    k: &PwKernel,
    stride: usize,
    accum: QFormat,
) -> Result<Tensor> {
    pw_conv_impl(x, k, stride, Some(accum))
}

fn pw_conv_impl(x: &Tensor, k: &PwKernel, stride: usize, accum: Option<QFormat>) -> Result<Tensor> {
    check_channels("pw_conv", x.channels(), k.in_channels())?;
    let fixed = x
        .as_raw()
        .map(|(_, feature)| (feature, accum.unwrap_or(feature.default_accumulator())));
    let mut acc = PwAccumulator::new(k, x.height(), x.width(), stride, fixed)?;
    acc.accumulate(x, 0)?;
    Ok(acc.finish())
}
