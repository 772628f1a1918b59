use rayon::prelude::*;

use super::pointwise::PwAccumulator;
use super::{dw_conv3x3, dw_deconv3x3_fast, DwKernel, PwKernel};
use crate::error::{Error, Result};
use crate::tensor::{QFormat, Tensor};

/// Channel partitioning of the on-chip feature buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileConfig {
    pub channel_partition: usize,
    pub buffer_height: usize,
    pub buffer_width: usize,
}

impl Default for TileConfig {
    /// 32-channel partitions over 32 × 152 buffers.
    fn default() -> Self {
        TileConfig {
            channel_partition: 32,
            buffer_height: 32,
            buffer_width: 152,
        }
    }
}

impl TileConfig {
    pub fn with_partition(channel_partition: usize) -> Result<Self> {
        let cfg = TileConfig {
            channel_partition,
            ..TileConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_partition == 0 {
            return Err(Error::Input("channel partition must be at least 1".into()));
        }
        if self.buffer_height < 3 || self.buffer_width < 3 {
            return Err(Error::Input(format!(
                "feature buffer {}x{} smaller than the 3x3 kernel footprint",
                self.buffer_height, self.buffer_width
            )));
        }
        Ok(())
    }

    fn tiles(&self, channels: usize) -> Vec<(usize, usize)> {
        (0..channels)
            .step_by(self.channel_partition)
            .map(|s| (s, (s + self.channel_partition).min(channels)))
            .collect()
    }
}

/// A kernel invocation that [`tiled_execute`] can split over channels.
#[derive(Debug, Clone, Copy)]
pub enum KernelOp<'a> {
    DwConv {
        kernel: &'a DwKernel,
        stride: usize,
    },
    /// `accum: None` uses the feature format's default accumulator.
    PwConv {
        kernel: &'a PwKernel,
        stride: usize,
        accum: Option<QFormat>,
    },
    DwDeconv {
        kernel: &'a DwKernel,
    },
}

impl KernelOp<'_> {
    /// Untiled execution.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        tiled_execute(
            x,
            self,
            &TileConfig {
                channel_partition: x.channels().max(1),
                ..TileConfig::default()
            },
        )
    }
}

/// Process `x` in groups of `cfg.channel_partition` channels. Depthwise ops
/// run per group and concatenate; pointwise carries its input-channel sums
/// across groups in accumulator precision.
pub fn tiled_execute(x: &Tensor, op: &KernelOp<'_>, cfg: &TileConfig) -> Result<Tensor> {
    cfg.validate()?;
    let tiles = cfg.tiles(x.channels());
    match *op {
        KernelOp::DwConv { kernel, stride } => {
            check(x, kernel.channels())?;
            let parts = tiles
                .par_iter()
                .map(|&(s, e)| dw_conv3x3(&x.slice_channels(s, e)?, &kernel.slice(s, e), stride))
                .collect::<Result<Vec<_>>>()?;
            Tensor::concat_channels(&parts)
        }
        KernelOp::DwDeconv { kernel } => {
            check(x, kernel.channels())?;
            let parts = tiles
                .par_iter()
                .map(|&(s, e)| dw_deconv3x3_fast(&x.slice_channels(s, e)?, &kernel.slice(s, e)))
                .collect::<Result<Vec<_>>>()?;
            Tensor::concat_channels(&parts)
        }
        KernelOp::PwConv {
            kernel,
            stride,
            accum,
        } => {
            check(x, kernel.in_channels())?;
            let fixed = x
                .as_raw()
                .map(|(_, f)| (f, accum.unwrap_or(f.default_accumulator())));
            let mut acc = PwAccumulator::new(kernel, x.height(), x.width(), stride, fixed)?;
            for (s, e) in tiles {
                acc.accumulate(&x.slice_channels(s, e)?, s)?;
            }
            Ok(acc.finish())
        }
    }
}

fn check(x: &Tensor, want: usize) -> Result<()> {
    if x.channels() != want {
        return Err(Error::Dimension(format!(
            "tiled op: input has {} channels, kernel expects {want}",
            x.channels()
        )));
    }
    Ok(())
}
