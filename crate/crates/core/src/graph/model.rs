use std::collections::HashMap;

use super::spec::{BlockKind, BlockSpec, LayerOp, LayerSpec, NetworkSpec};
use super::weights::{bias_path, Weights};
use crate::error::{Error, Result};
use crate::kernels::{
    conv3x3, deconv3x3, leaky_relu, tiled_execute, ConvKernel, DwKernel, KernelOp, PwKernel,
    TileConfig,
};
use crate::tensor::{dequantize, quantize, Dtype, Precision, Tensor};

/// Output shape of every block, in execution order.
pub type Trace = Vec<(&'static str, (usize, usize, usize))>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    LeakyRelu,
    /// Every activation replaced by the identity; used for linearity checks.
    Identity,
}

#[derive(Debug, Clone)]
enum Layer {
    Dense { kernel: ConvKernel, stride: usize },
    DenseDeconv { kernel: ConvKernel },
    Pointwise { kernel: PwKernel, stride: usize },
    SepConv { dw: DwKernel, pw: PwKernel, stride: usize },
    SepDeconv { dw: DwKernel, pw: PwKernel },
}

/// A network bound to its weights and an arithmetic mode, ready to run.
#[derive(Debug, Clone)]
pub struct Model {
    net: NetworkSpec,
    layers: HashMap<String, Layer>,
    precision: Precision,
    activation: Activation,
    tile: TileConfig,
}

fn taps_and_bias(w: &Weights, path: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let taps = w
        .get(path)
        .ok_or_else(|| Error::Weights(format!("missing layer {path}")))?;
    let bias_key = bias_path(path);
    let bias = w
        .get(&bias_key)
        .ok_or_else(|| Error::Weights(format!("missing layer {bias_key}")))?;
    Ok((taps.to_f64(), bias.to_f64()))
}

fn compile(layer: &LayerSpec, w: &Weights) -> Result<Layer> {
    let sub = |s: &str| format!("{}/{s}", layer.path);
    let dw = |channels| -> Result<DwKernel> {
        let (t, b) = taps_and_bias(w, &sub("dw"))?;
        DwKernel::new(channels, t, b)
    };
    let pw = |path: &str, m, n| -> Result<PwKernel> {
        let (t, b) = taps_and_bias(w, path)?;
        PwKernel::new(n, m, t, b)
    };
    let dense = |m, n| -> Result<ConvKernel> {
        let (t, b) = taps_and_bias(w, &layer.path)?;
        ConvKernel::new(n, m, t, b)
    };
    Ok(match (layer.op, layer.ds) {
        (LayerOp::Conv1x1 { m, n, stride }, _) => Layer::Pointwise {
            kernel: pw(&layer.path, m, n)?,
            stride,
        },
        (LayerOp::Conv3x3 { m, n, stride }, false) => Layer::Dense {
            kernel: dense(m, n)?,
            stride,
        },
        (LayerOp::Conv3x3 { m, n, stride }, true) => Layer::SepConv {
            dw: dw(m)?,
            pw: pw(&sub("pw"), m, n)?,
            stride,
        },
        (LayerOp::Deconv3x3 { m, n }, false) => Layer::DenseDeconv {
            kernel: dense(m, n)?,
        },
        (LayerOp::Deconv3x3 { m, n }, true) => Layer::SepDeconv {
            dw: dw(m)?,
            pw: pw(&sub("pw"), m, n)?,
        },
    })
}

impl Model {
    pub fn new(net: &NetworkSpec, weights: &Weights, precision: Precision) -> Result<Self> {
        weights.validate(net)?;
        let layers = net
            .layers()
            .iter()
            .map(|l| Ok((l.path.clone(), compile(l, weights)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Model {
            net: net.clone(),
            layers,
            precision,
            activation: Activation::default(),
            tile: TileConfig::default(),
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_tiling(mut self, tile: TileConfig) -> Result<Self> {
        tile.validate()?;
        self.tile = tile;
        Ok(self)
    }

    pub fn net(&self) -> &NetworkSpec {
        &self.net
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    fn act(&self, x: Tensor) -> Tensor {
        match self.activation {
            Activation::LeakyRelu => leaky_relu(&x),
            Activation::Identity => x,
        }
    }

    fn layer(&self, path: String, x: &Tensor) -> Result<Tensor> {
        let layer = self
            .layers
            .get(&path)
            .ok_or_else(|| Error::Weights(format!("missing layer {path}")))?;
        let accum = match self.precision {
            Precision::Fixed { accum, .. } => Some(accum),
            Precision::Real => None,
        };
        let pw = |x: &Tensor, kernel: &PwKernel, stride| {
            tiled_execute(
                x,
                &KernelOp::PwConv {
                    kernel,
                    stride,
                    accum,
                },
                &self.tile,
            )
        };
        match layer {
            Layer::Dense { kernel, stride } => conv3x3(x, kernel, *stride),
            Layer::DenseDeconv { kernel } => deconv3x3(x, kernel),
            Layer::Pointwise { kernel, stride } => pw(x, kernel, *stride),
            Layer::SepConv { dw, pw: p, stride } => {
                let t = tiled_execute(
                    x,
                    &KernelOp::DwConv {
                        kernel: dw,
                        stride: *stride,
                    },
                    &self.tile,
                )?;
                pw(&t, p, 1)
            }
            Layer::SepDeconv { dw, pw: p } => {
                let t = tiled_execute(x, &KernelOp::DwDeconv { kernel: dw }, &self.tile)?;
                pw(&t, p, 1)
            }
        }
    }

    fn encoder(&self, b: &BlockSpec, x: &Tensor) -> Result<Tensor> {
        let p = |n: &str| format!("{}/{n}", b.name);
        let t = self.act(self.layer(p("conv_a"), x)?);
        let main = self.layer(p("conv_b"), &t)?;
        let y = if b.has_feedforward {
            let shortcut = if b.has_projection() {
                self.layer(p("conv_a_extra"), x)?
            } else {
                x.clone()
            };
            self.act(main.add(&shortcut)?)
        } else {
            self.act(main)
        };
        let t = self.act(self.layer(p("conv_c"), &y)?);
        let main = self.layer(p("conv_d"), &t)?;
        Ok(if b.has_feedforward {
            self.act(main.add(&y)?)
        } else {
            self.act(main)
        })
    }

    fn decoder(&self, b: &BlockSpec, x: &Tensor, skip: &Tensor) -> Result<Tensor> {
        let up = self.act(self.layer(format!("{}/upsample", b.name), x)?);
        if up.shape() != skip.shape() {
            return Err(Error::Dimension(format!(
                "{}: upsampled {:?} does not match skip {:?}",
                b.name,
                up.shape(),
                skip.shape()
            )));
        }
        let fused = up.add(skip)?;
        Ok(self.act(self.layer(format!("{}/conv", b.name), &fused)?))
    }

    /// Run one frame. Returns the residual map (`H × W × 1`) in the model's
    /// arithmetic, and the shape observed after every block.
    pub fn forward_traced(&self, x: &Tensor) -> Result<(Tensor, Trace)> {
        let want = (self.net.input_height, self.net.input_width, 1);
        if x.shape() != want {
            return Err(Error::Dimension(format!(
                "network input must be {want:?}, got {:?}",
                x.shape()
            )));
        }
        let mut cur = match (self.precision, x.dtype()) {
            (Precision::Real, Dtype::Real) => x.clone(),
            (Precision::Real, Dtype::Fixed(_)) => dequantize(x)?,
            (Precision::Fixed { feature, .. }, _) => quantize(x, feature),
        };
        let mut skips: HashMap<&str, Tensor> = HashMap::new();
        let mut trace = Vec::with_capacity(self.net.blocks.len());
        for b in &self.net.blocks {
            let next = match b.kind {
                BlockKind::InConv | BlockKind::OutConv1 => {
                    self.act(self.layer(b.name.to_string(), &cur)?)
                }
                BlockKind::OutConv2 => self.layer(b.name.to_string(), &cur)?,
                BlockKind::Encoder => self.encoder(b, &cur)?,
                BlockKind::Decoder => {
                    let source = skip_source(b.name)?;
                    let skip = skips.get(source).ok_or_else(|| {
                        Error::Dimension(format!("{}: skip from {source} unavailable", b.name))
                    })?;
                    self.decoder(b, &cur, skip)?
                }
            };
            if next.shape() != b.output_shape() {
                return Err(Error::Dimension(format!(
                    "{} produced {:?}, expected {:?}",
                    b.name,
                    next.shape(),
                    b.output_shape()
                )));
            }
            trace.push((b.name, next.shape()));
            if matches!(b.name, "e1" | "e2" | "e3") {
                skips.insert(b.name, next.clone());
            }
            cur = next;
        }
        Ok((cur, trace))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_traced(x).map(|(t, _)| t)
    }
}

fn skip_source(decoder: &str) -> Result<&'static str> {
    match decoder {
        "d1" => Ok("e3"),
        "d2" => Ok("e2"),
        "d3" => Ok("e1"),
        other => Err(Error::Dimension(format!("no skip source for {other}"))),
    }
}

/// Real-valued forward pass.
pub fn forward(net: &NetworkSpec, w: &Weights, x: &Tensor) -> Result<Tensor> {
    Model::new(net, w, Precision::Real)?.forward(x)
}
