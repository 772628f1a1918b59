use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    InConv,
    Encoder,
    Decoder,
    OutConv1,
    OutConv2,
}

/// One row of the network table. `m`, `n`, `k` are input, output and skip
/// channels; spatial sizes are `(height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: &'static str,
    pub kind: BlockKind,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub stride: usize,
    pub has_feedforward: bool,
    pub ds: bool,
    pub input_size: (usize, usize),
    pub output_size: (usize, usize),
}

impl BlockSpec {
    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.input_size.0, self.input_size.1, self.m)
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        (self.output_size.0, self.output_size.1, self.n)
    }

    /// Whether the first residual unit needs a 1×1 projection shortcut.
    pub fn has_projection(&self) -> bool {
        self.kind == BlockKind::Encoder
            && self.has_feedforward
            && (self.stride != 1 || self.m != self.n)
    }

    /// Logical layers of this block in execution order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let (ih, iw) = self.input_size;
        let (oh, ow) = self.output_size;
        let layer = |name: &str, op: LayerOp, inp: (usize, usize), out: (usize, usize)| LayerSpec {
            path: format!("{}/{}", self.name, name),
            op,
            ds: self.ds,
            input_size: inp,
            output_size: out,
        };
        let conv = |m, n, stride| LayerOp::Conv3x3 { m, n, stride };
        match self.kind {
            BlockKind::InConv | BlockKind::OutConv1 | BlockKind::OutConv2 => vec![LayerSpec {
                path: self.name.to_string(),
                op: conv(self.m, self.n, 1),
                ds: self.ds,
                input_size: self.input_size,
                output_size: self.output_size,
            }],
            BlockKind::Encoder => {
                let mut v = vec![
                    layer("conv_a", conv(self.m, self.n, self.stride), (ih, iw), (oh, ow)),
                    layer("conv_b", conv(self.n, self.n, 1), (oh, ow), (oh, ow)),
                ];
                if self.has_projection() {
                    v.push(layer(
                        "conv_a_extra",
                        LayerOp::Conv1x1 {
                            m: self.m,
                            n: self.n,
                            stride: self.stride,
                        },
                        (ih, iw),
                        (oh, ow),
                    ));
                }
                v.push(layer("conv_c", conv(self.n, self.n, 1), (oh, ow), (oh, ow)));
                v.push(layer("conv_d", conv(self.n, self.n, 1), (oh, ow), (oh, ow)));
                v
            }
            BlockKind::Decoder => vec![
                layer(
                    "upsample",
                    LayerOp::Deconv3x3 {
                        m: self.m,
                        n: self.n,
                    },
                    (ih, iw),
                    (oh, ow),
                ),
                layer("conv", conv(self.n, self.n, 1), (oh, ow), (oh, ow)),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    Conv3x3 { m: usize, n: usize, stride: usize },
    Conv1x1 { m: usize, n: usize, stride: usize },
    Deconv3x3 { m: usize, n: usize },
}

/// A convolution-like layer. In separable mode every 3×3 layer expands into
/// a depthwise stage (`path/dw`) and a pointwise stage (`path/pw`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub path: String,
    pub op: LayerOp,
    pub ds: bool,
    pub input_size: (usize, usize),
    pub output_size: (usize, usize),
}

/// Parameter tensor kinds as stored in a weight file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// `[3, 3, in, out]`
    Dense3x3 { m: usize, n: usize },
    /// `[channels, 3, 3]`
    Depthwise { channels: usize },
    /// `[out, in]`
    Pointwise { m: usize, n: usize },
}

impl ParamKind {
    pub fn tap_dims(&self) -> Vec<usize> {
        match *self {
            ParamKind::Dense3x3 { m, n } => vec![3, 3, m, n],
            ParamKind::Depthwise { channels } => vec![channels, 3, 3],
            ParamKind::Pointwise { m, n } => vec![n, m],
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            ParamKind::Dense3x3 { n, .. } | ParamKind::Pointwise { n, .. } => n,
            ParamKind::Depthwise { channels } => channels,
        }
    }

    pub fn tap_count(&self) -> usize {
        self.tap_dims().iter().product()
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            ParamKind::Dense3x3 { m, .. } => 9 * m,
            ParamKind::Depthwise { .. } => 9,
            ParamKind::Pointwise { m, .. } => m,
        }
    }
}

/// A stored parameter group: taps at `path`, biases at `path/bias`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub path: String,
    pub kind: ParamKind,
    /// Multiply-accumulates performed by this stage for one frame.
    pub macs: u64,
}

impl LayerSpec {
    /// Weight groups backing this layer.
    pub fn params(&self) -> Vec<ParamSpec> {
        let (ih, iw) = self.input_size;
        let (oh, ow) = self.output_size;
        let in_px = (ih * iw) as u64;
        let out_px = (oh * ow) as u64;
        let p = |suffix: &str, kind, macs| ParamSpec {
            path: if suffix.is_empty() {
                self.path.clone()
            } else {
                format!("{}/{}", self.path, suffix)
            },
            kind,
            macs,
        };
        match (self.op, self.ds) {
            (LayerOp::Conv1x1 { m, n, .. }, _) => {
                vec![p("", ParamKind::Pointwise { m, n }, out_px * (m * n) as u64)]
            }
            (LayerOp::Conv3x3 { m, n, .. }, false) => {
                vec![p("", ParamKind::Dense3x3 { m, n }, out_px * (9 * m * n) as u64)]
            }
            (LayerOp::Conv3x3 { m, n, .. }, true) => vec![
                p("dw", ParamKind::Depthwise { channels: m }, out_px * (9 * m) as u64),
                p("pw", ParamKind::Pointwise { m, n }, out_px * (m * n) as u64),
            ],
            // Transposed convolutions are counted at their non-zero products:
            // nine per input pixel and channel pair.
            (LayerOp::Deconv3x3 { m, n }, false) => {
                vec![p("", ParamKind::Dense3x3 { m, n }, in_px * (9 * m * n) as u64)]
            }
            (LayerOp::Deconv3x3 { m, n }, true) => vec![
                p("dw", ParamKind::Depthwise { channels: m }, in_px * (9 * m) as u64),
                p("pw", ParamKind::Pointwise { m, n }, out_px * (m * n) as u64),
            ],
        }
    }

    /// Taps of the standard (non-separable) form of this layer.
    pub fn standard_taps(&self) -> usize {
        match self.op {
            LayerOp::Conv3x3 { m, n, .. } | LayerOp::Deconv3x3 { m, n } => 9 * m * n,
            LayerOp::Conv1x1 { m, n, .. } => m * n,
        }
    }

    pub fn taps(&self) -> usize {
        self.params().iter().map(|p| p.kind.tap_count()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.params()
            .iter()
            .map(|p| p.kind.tap_count() + p.kind.bias_len())
            .sum()
    }

    pub fn ops(&self) -> u64 {
        2 * self.params().iter().map(|p| p.macs).sum::<u64>()
    }

    pub fn out_channels(&self) -> usize {
        match self.op {
            LayerOp::Conv3x3 { n, .. } | LayerOp::Conv1x1 { n, .. } | LayerOp::Deconv3x3 { n, .. } => n,
        }
    }
}

/// The full encoder-decoder, input `height × width × 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub blocks: Vec<BlockSpec>,
    pub input_height: usize,
    pub input_width: usize,
    pub ds: bool,
}

pub const INPUT_HEIGHT: usize = 256;
pub const INPUT_WIDTH: usize = 1216;

/// The network at its native 256 × 1216 input.
pub fn build_depthnet(ds: bool) -> NetworkSpec {
    build_depthnet_sized(ds, INPUT_HEIGHT, INPUT_WIDTH).expect("native size is valid")
}

/// The same topology at another input size; both sides must be multiples of 8.
pub fn build_depthnet_sized(ds: bool, height: usize, width: usize) -> Result<NetworkSpec> {
    if height == 0 || width == 0 || !height.is_multiple_of(8) || !width.is_multiple_of(8) {
        return Err(Error::Input(format!(
            "network input {height}x{width} must be a positive multiple of 8 on both sides"
        )));
    }
    let s = |d: usize| (height / d, width / d);
    let block = |name, kind, m, n, k, stride, inp, out| BlockSpec {
        name,
        kind,
        m,
        n,
        k,
        stride,
        has_feedforward: kind == BlockKind::Encoder && name != "e4",
        ds,
        input_size: inp,
        output_size: out,
    };
    use BlockKind::*;
    let blocks = vec![
        block("in_conv", InConv, 1, 32, 0, 1, s(1), s(1)),
        block("e1", Encoder, 32, 32, 0, 1, s(1), s(1)),
        block("e2", Encoder, 32, 32, 0, 2, s(1), s(2)),
        block("e3", Encoder, 32, 64, 0, 2, s(2), s(4)),
        block("e4", Encoder, 64, 128, 0, 2, s(4), s(8)),
        block("d1", Decoder, 128, 64, 64, 2, s(8), s(4)),
        block("d2", Decoder, 64, 32, 32, 2, s(4), s(2)),
        block("d3", Decoder, 32, 32, 32, 2, s(2), s(1)),
        block("out_conv1", OutConv1, 32, 32, 0, 1, s(1), s(1)),
        block("out_conv2", OutConv2, 32, 1, 0, 1, s(1), s(1)),
    ];
    Ok(NetworkSpec {
        blocks,
        input_height: height,
        input_width: width,
        ds,
    })
}

impl NetworkSpec {
    pub fn layers(&self) -> Vec<LayerSpec> {
        self.blocks.iter().flat_map(|b| b.layers()).collect()
    }

    pub fn params(&self) -> Vec<ParamSpec> {
        self.layers().iter().flat_map(|l| l.params()).collect()
    }

    pub fn block(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Total taps plus biases.
pub fn count_params(net: &NetworkSpec) -> usize {
    net.layers().iter().map(|l| l.param_count()).sum()
}

/// Total operations for one frame, a multiply-accumulate counting as two.
pub fn count_ops(net: &NetworkSpec) -> u64 {
    net.layers().iter().map(|l| l.ops()).sum()
}
