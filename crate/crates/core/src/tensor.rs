//! Dense `H×W×C` feature maps and the signed fixed-point number system.
//!
//! Elements are stored row-major with channels innermost: the sample at
//! `(y, x, c)` lives at `(y * width + x) * channels + c`. A tensor holds either
//! real samples (`f64`) or raw fixed-point integers tagged with their
//! [`QFormat`].

use crate::error::{Error, Result};

/// Signed fixed-point format: `total_bits` wide, `frac_bits` of which are
/// fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    /// Default feature-map format.
    pub const FEATURE: QFormat = QFormat {
        total_bits: 16,
        frac_bits: 8,
    };
    /// Default accumulator format used by pointwise convolution.
    pub const ACCUMULATOR: QFormat = QFormat {
        total_bits: 32,
        frac_bits: 16,
    };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(8..=32).contains(&total_bits) {
            return Err(Error::Input(format!(
                "fixed-point width {total_bits} outside 8..=32"
            )));
        }
        if frac_bits >= total_bits {
            return Err(Error::Input(format!(
                "fractional bits {frac_bits} must be below total bits {total_bits}"
            )));
        }
        Ok(QFormat {
            total_bits,
            frac_bits,
        })
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Value of one least-significant bit.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.resolution()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.resolution()
    }

    /// Accumulator paired with this feature format: 16 more bits, 8 of them
    /// fractional, capped at 32 bits.
    pub fn default_accumulator(self) -> QFormat {
        let total_bits = (self.total_bits + 16).min(32);
        let frac_bits = (self.frac_bits + 8).min(total_bits - 1);
        QFormat {
            total_bits,
            frac_bits,
        }
    }

    pub fn saturate(self, raw: i64) -> i64 {
        raw.clamp(self.min_raw(), self.max_raw())
    }

    /// Nearest raw value for `x`, half away from zero, saturated.
    pub fn quantize_scalar(self, x: f64) -> i32 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * (self.frac_bits as f64).exp2()).round();
        let clamped = scaled.clamp(self.min_raw() as f64, self.max_raw() as f64);
        clamped as i32
    }

    pub fn dequantize_scalar(self, raw: i32) -> f64 {
        raw as f64 * self.resolution()
    }
}

impl std::fmt::Display for QFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q({},{})", self.total_bits, self.frac_bits)
    }
}

impl std::str::FromStr for QFormat {
    type Err = Error;

    /// Parses `TOTAL:FRAC`.
    fn from_str(s: &str) -> Result<Self> {
        let (total, frac) = s
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("expected TOTAL:FRAC, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| Error::Input(format!("bad fixed-point field {v:?}")))
        };
        QFormat::new(parse(total)?, parse(frac)?)
    }
}

/// Shift `value` right by `shift` bits rounding half away from zero.
/// Negative shifts scale up.
pub fn round_shift(value: i64, shift: i32) -> i64 {
    if shift <= 0 {
        return value.saturating_mul(1i64 << (-shift).min(62));
    }
    let shift = shift.min(62) as u32;
    let half = 1i64 << (shift - 1);
    if value >= 0 {
        (value + half) >> shift
    } else {
        -((-value + half) >> shift)
    }
}

/// Requantize a raw value carrying `from_frac` fractional bits into `to`.
pub fn requantize(value: i64, from_frac: u32, to: QFormat) -> i64 {
    to.saturate(round_shift(value, from_frac as i32 - to.frac_bits as i32))
}

/// Arithmetic used by an inference pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Real,
    /// `feature` holds activations and weights; `accum` is the pointwise
    /// accumulator.
    Fixed { feature: QFormat, accum: QFormat },
}

impl Precision {
    /// Checked fixed-point configuration: the accumulator must be at least
    /// 8 bits wider than the feature format.
    pub fn fixed(feature: QFormat, accum: QFormat) -> Result<Self> {
        if accum.total_bits < feature.total_bits + 8 {
            return Err(Error::Input(format!(
                "accumulator {accum} must be at least 8 bits wider than feature format {feature}"
            )));
        }
        if accum.frac_bits < feature.frac_bits {
            return Err(Error::Input(format!(
                "accumulator {accum} has fewer fractional bits than {feature}"
            )));
        }
        Ok(Precision::Fixed { feature, accum })
    }

    pub fn default_fixed() -> Self {
        Precision::Fixed {
            feature: QFormat::FEATURE,
            accum: QFormat::ACCUMULATOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Real(Vec<f64>),
    Fixed { raw: Vec<i32>, format: QFormat },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    Real,
    Fixed(QFormat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: TensorData,
}

fn check_dims(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 || channels == 0 {
        return Err(Error::Dimension(format!(
            "tensor dims must be positive, got {height}x{width}x{channels}"
        )));
    }
    if height * width * channels != len {
        return Err(Error::Dimension(format!(
            "{height}x{width}x{channels} tensor needs {} elements, got {len}",
            height * width * channels
        )));
    }
    Ok(())
}

impl Tensor {
    pub fn from_real(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, channels, data.len())?;
        Ok(Tensor {
            height,
            width,
            channels,
            data: TensorData::Real(data),
        })
    }

    pub fn from_raw(
        height: usize,
        width: usize,
        channels: usize,
        raw: Vec<i32>,
        format: QFormat,
    ) -> Result<Self> {
        check_dims(height, width, channels, raw.len())?;
        if let Some(bad) = raw
            .iter()
            .find(|&&r| (r as i64) < format.min_raw() || (r as i64) > format.max_raw())
        {
            return Err(Error::Input(format!("raw value {bad} outside {format}")));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data: TensorData::Fixed { raw, format },
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor::from_real(height, width, channels, vec![0.0; height * width * channels])
            .expect("zeros: dims must be positive")
    }

    /// A zero tensor of the given dtype.
    pub fn zeros_like_dtype(height: usize, width: usize, channels: usize, dtype: Dtype) -> Self {
        match dtype {
            Dtype::Real => Tensor::zeros(height, width, channels),
            Dtype::Fixed(format) => Tensor {
                height,
                width,
                channels,
                data: TensorData::Fixed {
                    raw: vec![0; height * width * channels],
                    format,
                },
            },
        }
    }

    pub(crate) fn new_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: TensorData,
    ) -> Self {
        debug_assert_eq!(
            height * width * channels,
            match &data {
                TensorData::Real(v) => v.len(),
                TensorData::Fixed { raw, .. } => raw.len(),
            }
        );
        Tensor {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match &self.data {
            TensorData::Real(_) => Dtype::Real,
            TensorData::Fixed { format, .. } => Dtype::Fixed(*format),
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert!(y < self.height && x < self.width && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    /// Real samples, or `None` for fixed-point tensors.
    pub fn as_real(&self) -> Option<&[f64]> {
        match &self.data {
            TensorData::Real(v) => Some(v),
            TensorData::Fixed { .. } => None,
        }
    }

    pub fn as_raw(&self) -> Option<(&[i32], QFormat)> {
        match &self.data {
            TensorData::Fixed { raw, format } => Some((raw, *format)),
            TensorData::Real(_) => None,
        }
    }

    /// Sample at `(y, x, c)` as a real number (dequantized if fixed).
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        let i = self.index(y, x, c);
        match &self.data {
            TensorData::Real(v) => v[i],
            TensorData::Fixed { raw, format } => format.dequantize_scalar(raw[i]),
        }
    }

    /// Write a real value; fixed tensors quantize it.
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        match &mut self.data {
            TensorData::Real(v) => v[i] = value,
            TensorData::Fixed { raw, format } => raw[i] = format.quantize_scalar(value),
        }
    }

    /// All samples as reals.
    pub fn to_real_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::Real(v) => v.clone(),
            TensorData::Fixed { raw, format } => {
                raw.iter().map(|&r| format.dequantize_scalar(r)).collect()
            }
        }
    }

    /// Copy channels `[start, end)` into a new tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Tensor> {
        if start >= end || end > self.channels {
            return Err(Error::Dimension(format!(
                "channel range {start}..{end} invalid for {} channels",
                self.channels
            )));
        }
        let n = end - start;
        let pixels = self.height * self.width;
        let data = match &self.data {
            TensorData::Real(v) => {
                let mut out = Vec::with_capacity(pixels * n);
                for p in 0..pixels {
                    let base = p * self.channels;
                    out.extend_from_slice(&v[base + start..base + end]);
                }
                TensorData::Real(out)
            }
            TensorData::Fixed { raw, format } => {
                let mut out = Vec::with_capacity(pixels * n);
                for p in 0..pixels {
                    let base = p * self.channels;
                    out.extend_from_slice(&raw[base + start..base + end]);
                }
                TensorData::Fixed {
                    raw: out,
                    format: *format,
                }
            }
        };
        Ok(Tensor::new_unchecked(self.height, self.width, n, data))
    }

    /// Concatenate along the channel axis, in order.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("concat of zero tensors".into()))?;
        let (h, w) = (first.height, first.width);
        let dtype = first.dtype();
        for p in parts {
            if p.height != h || p.width != w || p.dtype() != dtype {
                return Err(Error::Dimension(format!(
                    "cannot concat {:?} with {:?}",
                    first.shape(),
                    p.shape()
                )));
            }
        }
        let channels: usize = parts.iter().map(|p| p.channels).sum();
        let mut out = Tensor::zeros_like_dtype(h, w, channels, dtype);
        for pixel in 0..h * w {
            let mut offset = pixel * channels;
            for p in parts {
                let src = pixel * p.channels..(pixel + 1) * p.channels;
                match (&mut out.data, &p.data) {
                    (TensorData::Real(dst), TensorData::Real(s)) => {
                        dst[offset..offset + p.channels].copy_from_slice(&s[src]);
                    }
                    (TensorData::Fixed { raw: dst, .. }, TensorData::Fixed { raw: s, .. }) => {
                        dst[offset..offset + p.channels].copy_from_slice(&s[src]);
                    }
                    _ => unreachable!("dtype checked above"),
                }
                offset += p.channels;
            }
        }
        Ok(out)
    }

    /// Element-wise sum; fixed tensors saturate.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = match (&self.data, &other.data) {
            (TensorData::Real(a), TensorData::Real(b)) => {
                TensorData::Real(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (TensorData::Fixed { raw: a, format }, TensorData::Fixed { raw: b, format: fb })
                if format == fb =>
            {
                TensorData::Fixed {
                    raw: a
                        .iter()
                        .zip(b)
                        .map(|(&x, &y)| format.saturate(x as i64 + y as i64) as i32)
                        .collect(),
                    format: *format,
                }
            }
            _ => {
                return Err(Error::Dimension(format!(
                    "dtype mismatch in add: {:?} vs {:?}",
                    self.dtype(),
                    other.dtype()
                )))
            }
        };
        Ok(Tensor::new_unchecked(self.height, self.width, self.channels, data))
    }

    /// Largest absolute element-wise difference, compared as reals.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "cannot compare {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(self
            .to_real_vec()
            .iter()
            .zip(other.to_real_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Quantize a real tensor into `format`. Rounds half away from zero and
/// saturates at the format bounds. Fixed inputs are requantized.
pub fn quantize(t: &Tensor, format: QFormat) -> Tensor {
    let raw = match &t.data {
        TensorData::Real(v) => v.iter().map(|&x| format.quantize_scalar(x)).collect(),
        TensorData::Fixed { raw, format: from } => raw
            .iter()
            .map(|&r| requantize(r as i64, from.frac_bits, format) as i32)
            .collect(),
    };
    Tensor::new_unchecked(
        t.height,
        t.width,
        t.channels,
        TensorData::Fixed { raw, format },
    )
}

/// Exact conversion of raw fixed-point samples back to reals.
pub fn dequantize(t: &Tensor) -> Result<Tensor> {
    match &t.data {
        TensorData::Fixed { .. } => Ok(Tensor::new_unchecked(
            t.height,
            t.width,
            t.channels,
            TensorData::Real(t.to_real_vec()),
        )),
        TensorData::Real(_) => Err(Error::Input("dequantize expects a fixed-point tensor".into())),
    }
}
