//! LiDAR depth completion engine.
//!
//! A sparse depth map projected from a point cloud is filled by an exact
//! Euclidean distance transform, and a compact encoder-decoder CNN predicts a
//! residual correction. The CNN runs on hand-written depthwise-separable
//! kernels, including a zero-skipping deconvolution, in real or fixed-point
//! arithmetic.

pub mod error;
pub mod graph;
pub mod kernels;
pub mod lidar_io;
pub mod metrics;
pub mod pgm;
pub mod preprocess;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{dequantize, quantize, Dtype, Precision, QFormat, Tensor, TensorData};
