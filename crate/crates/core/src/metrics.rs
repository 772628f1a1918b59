//! Error metrics of a completed depth map against semi-dense ground truth.

use std::fmt;

use crate::error::{Error, Result};
use crate::preprocess::DepthMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub rmse_mm: f64,
    pub mae_mm: f64,
    /// Inverse-depth errors in 1/km.
    pub irmse: f64,
    pub imae: f64,
    pub valid_pixels: usize,
    /// Valid ground-truth pixels where the prediction is 0; left out of the
    /// inverse metrics.
    pub zero_predictions: usize,
}

/// Metrics over pixels with `gt > 0`. Inverse depth is `1e6 / mm` (1/km).
pub fn evaluate(pred: &DepthMap, gt: &DepthMap) -> Result<MetricReport> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::Dimension(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let (mut n, mut abs, mut sq) = (0usize, 0.0f64, 0.0f64);
    let (mut ni, mut iabs, mut isq, mut zeros) = (0usize, 0.0f64, 0.0f64, 0usize);
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        if g == 0 {
            continue;
        }
        let e = p as f64 - g as f64;
        n += 1;
        abs += e.abs();
        sq += e * e;
        if p == 0 {
            zeros += 1;
            continue;
        }
        let ie = 1e6 / p as f64 - 1e6 / g as f64;
        ni += 1;
        iabs += ie.abs();
        isq += ie * ie;
    }
    if n == 0 {
        return Err(Error::Input("ground truth has no valid pixels".into()));
    }
    let (irmse, imae) = if ni == 0 {
        (0.0, 0.0)
    } else {
        ((isq / ni as f64).sqrt(), iabs / ni as f64)
    };
    Ok(MetricReport {
        rmse_mm: (sq / n as f64).sqrt(),
        mae_mm: abs / n as f64,
        irmse,
        imae,
        valid_pixels: n,
        zero_predictions: zeros,
    })
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rmse_mm={:.2} mae_mm={:.2} irmse={:.2} imae={:.2} valid_pixels={} zero_predictions={}",
            self.rmse_mm, self.mae_mm, self.irmse, self.imae, self.valid_pixels, self.zero_predictions
        )
    }
}
