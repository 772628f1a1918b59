use std::time::{Duration, Instant};

use super::{
    combine, dt_fill, normalize, project, top_fill, Calibration, DepthMap, Point, PointCloud,
    DEFAULT_SCALE_MM,
};
use crate::error::{Error, Result};
use crate::graph::Model;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub scale_mm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scale_mm: DEFAULT_SCALE_MM,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub project: Duration,
    pub top_fill: Duration,
    pub dt: Duration,
    pub normalize: Duration,
    pub cnn: Duration,
    pub combine: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.project + self.top_fill + self.dt + self.normalize + self.cnn + self.combine
    }

    pub fn named(&self) -> [(&'static str, Duration); 6] {
        [
            ("project", self.project),
            ("top_fill", self.top_fill),
            ("dt", self.dt),
            ("normalize", self.normalize),
            ("cnn", self.cnn),
            ("combine", self.combine),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Cropped sparse map, before top-fill.
    pub sparse: DepthMap,
    pub coarse: DepthMap,
    pub residual: Tensor,
    pub dense: DepthMap,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed();
    out
}

/// project → bottom-center crop to the network input → top-fill → DT →
/// normalize → CNN residual → combine.
pub fn run_pipeline(
    cloud: &PointCloud,
    calib: &Calibration,
    model: &Model,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    if cloud.is_empty() {
        return Err(Error::Input("point cloud is empty".into()));
    }
    let (h, w) = (model.net().input_height, model.net().input_width);
    let mut t = StageTimings::default();
    let sparse = timed(&mut t.project, || {
        project(cloud, calib)?.crop_bottom_center(w, h)
    })?;
    let filled = timed(&mut t.top_fill, || Ok(top_fill(&sparse)))?;
    let coarse = timed(&mut t.dt, || {
        dt_fill(&filled).map_err(|_| Error::Input("no LiDAR return lands inside the crop".into()))
    })?;
    let input = timed(&mut t.normalize, || normalize(&coarse, cfg.scale_mm))?;
    let residual = timed(&mut t.cnn, || model.forward(&input))?;
    let dense = timed(&mut t.combine, || combine(&coarse, &residual, cfg.scale_mm))?;
    Ok(PipelineOutput {
        sparse,
        coarse,
        residual,
        dense,
        timings: t,
    })
}

/// A wall perpendicular to the LiDAR's forward axis at `distance_m`,
/// sampled by `scanlines` lasers between -24.8° and +2° elevation and
/// `points_per_line` azimuths across ±45°.
pub fn synthetic_plane_scene(distance_m: f64, scanlines: usize, points_per_line: usize) -> PointCloud {
    let (lo, hi) = (-24.8f64, 2.0f64);
    let mut points = Vec::with_capacity(scanlines * points_per_line);
    for i in 0..scanlines {
        let el = if scanlines == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (scanlines - 1) as f64
        };
        for j in 0..points_per_line {
            let az = if points_per_line == 1 {
                0.0
            } else {
                -45.0 + 90.0 * j as f64 / (points_per_line - 1) as f64
            };
            points.push(Point::new(
                distance_m,
                distance_m * az.to_radians().tan(),
                distance_m * el.to_radians().tan(),
                0.5,
            ));
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_depthnet_sized, Weights};
    use crate::tensor::Precision;

    fn small_model(ds: bool, seed: Option<u64>) -> Model {
        let net = build_depthnet_sized(ds, 64, 128).unwrap();
        let w = match seed {
            Some(s) => Weights::random_init(&net, s),
            None => Weights::zeros(&net),
        };
        Model::new(&net, &w, Precision::Real).unwrap()
    }

    #[test]
    fn plane_with_zero_cnn_is_flat() {
        let calib = Calibration::kitti_like(1242, 375);
        let cloud = synthetic_plane_scene(20.0, 64, 400);
        let out = run_pipeline(&cloud, &calib, &small_model(true, None), &PipelineConfig::default())
            .unwrap();
        assert!(out.sparse.valid_count() > 0);
        assert_eq!(out.dense, dt_fill(&top_fill(&out.sparse)).unwrap().with_role(out.dense.role()));
        assert!(out.dense.values().iter().all(|&v| v == 20_000));
    }

    #[test]
    fn empty_cloud_rejected() {
        let calib = Calibration::kitti_like(1242, 375);
        let err = run_pipeline(&PointCloud::default(), &calib, &small_model(false, None), &PipelineConfig::default());
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn deterministic() {
        let calib = Calibration::kitti_like(1242, 375);
        let cloud = synthetic_plane_scene(15.0, 16, 200);
        let model = small_model(true, Some(3));
        let a = run_pipeline(&cloud, &calib, &model, &PipelineConfig::default()).unwrap();
        let b = run_pipeline(&cloud, &calib, &model, &PipelineConfig::default()).unwrap();
        assert_eq!(a.dense, b.dense);
    }
}
