use crate::tensor::{Tensor, TensorData};

pub const LEAKY_SLOPE: f64 = 0.2;

#[inline]
pub fn leaky_relu_scalar(v: f64) -> f64 {
    LEAKY_SLOPE * v.min(0.0) + v.max(0.0)
}

/// `round(raw · 0.2)` half away from zero; exact integer arithmetic.
#[inline]
fn leaky_relu_raw(raw: i32) -> i32 {
    if raw >= 0 {
        raw
    } else {
        let scaled = -(raw as i64) * 2;
        -((scaled + 5) / 10) as i32
    }
}

/// `0.2·min(v, 0) + max(v, 0)` element-wise.
pub fn leaky_relu(x: &Tensor) -> Tensor {
    let data = match x.data() {
        TensorData::Real(v) => TensorData::Real(v.iter().map(|&e| leaky_relu_scalar(e)).collect()),
        TensorData::Fixed { raw, format } => TensorData::Fixed {
            raw: raw.iter().map(|&r| leaky_relu_raw(r)).collect(),
            format: *format,
        },
    };
    Tensor::new_unchecked(x.height(), x.width(), x.channels(), data)
}
