//! Compute primitives of the process engine: depthwise 3×3 convolution,
//! pointwise 1×1 convolution, depthwise 3×3 deconvolution (naive and
//! zero-skipping), their dense 3×3 counterparts, LeakyReLU and channel-tiled
//! execution.
//!
//! Every kernel sums its products in a fixed order and adds the bias last, so
//! two routes that visit the same non-zero products in the same order agree
//! bit for bit.

mod activation;
mod dense;
mod depthwise;
mod lane;
mod pointwise;
mod tiling;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::tensor::QFormat;

pub use activation::{leaky_relu, leaky_relu_scalar, LEAKY_SLOPE};
pub use dense::{conv3x3, deconv3x3};
pub use depthwise::{
    dw_conv3x3, dw_deconv3x3_fast, dw_deconv3x3_fast_counted, dw_deconv3x3_naive,
    dw_deconv3x3_naive_counted,
};
pub use pointwise::{pw_conv, pw_conv_with_accumulator};
pub use tiling::{tiled_execute, KernelOp, TileConfig};

/// Per-channel 3×3 taps, `taps[c * 9 + ky * 3 + kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwKernel {
    channels: usize,
    taps: Vec<f64>,
    bias: Vec<f64>,
}

impl DwKernel {
    pub fn new(channels: usize, taps: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if channels == 0 || taps.len() != channels * 9 || bias.len() != channels {
            return Err(Error::Dimension(format!(
                "depthwise kernel for {channels} channels needs {} taps and {channels} biases, got {} and {}",
                channels * 9,
                taps.len(),
                bias.len()
            )));
        }
        Ok(DwKernel {
            channels,
            taps,
            bias,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn tap(&self, c: usize, ky: usize, kx: usize) -> f64 {
        self.taps[c * 9 + ky * 3 + kx]
    }

    /// Kernel rotated by 180°, as needed for deconvolution weights exported
    /// by frameworks that store transposed-convolution filters flipped.
    pub fn rotated_180(&self) -> DwKernel {
        let mut taps = vec![0.0; self.taps.len()];
        for c in 0..self.channels {
            for i in 0..9 {
                taps[c * 9 + i] = self.taps[c * 9 + (8 - i)];
            }
        }
        DwKernel {
            channels: self.channels,
            taps,
            bias: self.bias.clone(),
        }
    }

    /// Channels `[start, end)` as a kernel of their own.
    pub fn slice(&self, start: usize, end: usize) -> DwKernel {
        DwKernel {
            channels: end - start,
            taps: self.taps[start * 9..end * 9].to_vec(),
            bias: self.bias[start..end].to_vec(),
        }
    }
}

/// 1×1 taps as an `out × in` matrix, `taps[o * in_channels + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwKernel {
    out_channels: usize,
    in_channels: usize,
    taps: Vec<f64>,
    bias: Vec<f64>,
}

impl PwKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        taps: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0
            || in_channels == 0
            || taps.len() != out_channels * in_channels
            || bias.len() != out_channels
        {
            return Err(Error::Dimension(format!(
                "pointwise kernel {out_channels}x{in_channels} needs {} taps and {out_channels} biases, got {} and {}",
                out_channels * in_channels,
                taps.len(),
                bias.len()
            )));
        }
        Ok(PwKernel {
            out_channels,
            in_channels,
            taps,
            bias,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

/// Dense 3×3 taps in `[ky][kx][in][out]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    out_channels: usize,
    in_channels: usize,
    taps: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        taps: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0
            || in_channels == 0
            || taps.len() != 9 * out_channels * in_channels
            || bias.len() != out_channels
        {
            return Err(Error::Dimension(format!(
                "3x3 kernel {in_channels}->{out_channels} needs {} taps and {out_channels} biases, got {} and {}",
                9 * out_channels * in_channels,
                taps.len(),
                bias.len()
            )));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            taps,
            bias,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn tap(&self, ky: usize, kx: usize, ci: usize, co: usize) -> f64 {
        self.taps[((ky * 3 + kx) * self.in_channels + ci) * self.out_channels + co]
    }
}

/// Counts multiplications performed by an instrumented kernel call.
#[derive(Debug, Default)]
pub struct MulCounter(AtomicU64);

impl MulCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub(crate) fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }
}

/// Output extent of a same-padded strided 3×3 or strided 1×1 op.
pub fn strided_len(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

fn check_stride(stride: usize) -> Result<()> {
    match stride {
        1 | 2 => Ok(()),
        s => Err(Error::Input(format!("stride must be 1 or 2, got {s}"))),
    }
}

fn check_channels(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!(
            "{what}: input has {got} channels, kernel expects {want}"
        )));
    }
    Ok(())
}

pub(crate) fn quantize_all(values: &[f64], format: QFormat) -> Vec<i32> {
    values.iter().map(|&v| format.quantize_scalar(v)).collect()
}
