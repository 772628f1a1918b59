//! Everything around the CNN: projection of a point cloud into a sparse
//! depth map, cropping, top-fill, distance-transform coarse fill,
//! normalization and residual combination.

mod dt;
mod pipeline;
mod projection;

pub use dt::{dt_fill, dt_fill_brute_force};
pub use pipeline::{run_pipeline, synthetic_plane_scene, PipelineConfig, PipelineOutput, StageTimings};
pub use projection::{project, Calibration, Mat3x4, Mat4};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Residual and input normalization scale: 100 m in millimeters.
pub const DEFAULT_SCALE_MM: f64 = 100_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Point { x, y, z, intensity }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapRole {
    Sparse,
    Coarse,
    Dense,
}

/// Depth in integer millimeters, row-major; 0 marks a missing pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<u32>,
    role: MapRole,
}

impl DepthMap {
    pub fn new(height: usize, width: usize, values: Vec<u32>, role: MapRole) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} depth map needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(DepthMap {
            height,
            width,
            values,
            role,
        })
    }

    pub fn empty(height: usize, width: usize, role: MapRole) -> Self {
        DepthMap {
            height,
            width,
            values: vec![0; height * width],
            role,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn role(&self) -> MapRole {
        self.role
    }

    pub fn with_role(mut self, role: MapRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u32> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, mm: u32) {
        self.values[row * self.width + col] = mm;
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0).count()
    }

    /// The `width × height` window anchored at the bottom edge and centered
    /// horizontally.
    pub fn crop_bottom_center(&self, width: usize, height: usize) -> Result<DepthMap> {
        if width > self.width || height > self.height {
            return Err(Error::Dimension(format!(
                "cannot crop {width}x{height} from a {}x{} map",
                self.width, self.height
            )));
        }
        let x0 = (self.width - width) / 2;
        let y0 = self.height - height;
        let mut values = Vec::with_capacity(width * height);
        for row in y0..self.height {
            let start = row * self.width + x0;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        DepthMap::new(height, width, values, self.role)
    }
}

/// Every pixel above the topmost valid pixel of its column takes that
/// pixel's value.
pub fn top_fill(m: &DepthMap) -> DepthMap {
    let mut out = m.clone();
    for col in 0..m.width {
        if let Some(first) = (0..m.height).find(|&r| m.get(r, col) > 0) {
            let v = m.get(first, col);
            for row in 0..first {
                out.set(row, col, v);
            }
        }
    }
    out
}

/// `clamp(depth / scale_mm, 0, 1)` as an `H × W × 1` tensor.
pub fn normalize(m: &DepthMap, scale_mm: f64) -> Result<Tensor> {
    check_scale(scale_mm)?;
    let data = m
        .values
        .iter()
        .map(|&v| (v as f64 / scale_mm).clamp(0.0, 1.0))
        .collect();
    Tensor::from_real(m.height, m.width, 1, data)
}

/// `max(0, coarse + residual · scale_mm)`, rounded to whole millimeters.
pub fn combine(coarse: &DepthMap, residual: &Tensor, scale_mm: f64) -> Result<DepthMap> {
    check_scale(scale_mm)?;
    if residual.shape() != (coarse.height, coarse.width, 1) {
        return Err(Error::Dimension(format!(
            "residual {:?} does not match {}x{} coarse map",
            residual.shape(),
            coarse.height,
            coarse.width
        )));
    }
    let values = coarse
        .values
        .iter()
        .zip(residual.to_real_vec())
        .map(|(&c, r)| {
            let d = (c as f64 + r * scale_mm).round();
            if d.is_nan() || d <= 0.0 {
                0
            } else {
                d.min(u32::MAX as f64) as u32
            }
        })
        .collect();
    DepthMap::new(coarse.height, coarse.width, values, MapRole::Dense)
}

fn check_scale(scale_mm: f64) -> Result<()> {
    if !(scale_mm.is_finite() && scale_mm > 0.0) {
        return Err(Error::Input(format!("scale must be positive, got {scale_mm}")));
    }
    Ok(())
}
