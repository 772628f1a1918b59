use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use depthnet::graph::count_ops;
use depthnet::lidar_io::{read_calib, read_kitti_bin};
use depthnet::preprocess::{run_pipeline, synthetic_plane_scene, Calibration, PipelineConfig};

use crate::{model, ModelArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Timed frames, after one untimed warm-up frame.
    #[arg(long, default_value_t = 3)]
    frames: usize,
    /// Scan to process; a synthetic wall at 20 m is used otherwise.
    #[arg(long, value_name = "PATH", requires = "calib")]
    bin: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    calib: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn mean_median(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mid = v.len() / 2;
    let median = if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    };
    (mean, median)
}

pub fn run(args: &BenchArgs) -> anyhow::Result<()> {
    anyhow::ensure!(args.frames > 0, "--frames must be at least 1");
    let calib = match &args.calib {
        Some(p) => read_calib(p).context("[calib] reading calibration")?,
        None => Calibration::kitti_like(1242, 375),
    };
    let cloud = match &args.bin {
        Some(p) => read_kitti_bin(p).context("[input] reading point cloud")?,
        None => synthetic_plane_scene(20.0, 64, 1200),
    };
    let model = model::build(&args.model)?;
    let cfg = PipelineConfig {
        scale_mm: args.model.scale,
    };

    run_pipeline(&cloud, &calib, &model, &cfg).context("[pipeline] warm-up")?;
    let mut runs = Vec::with_capacity(args.frames);
    let mut checksum = None;
    for _ in 0..args.frames {
        let out = run_pipeline(&cloud, &calib, &model, &cfg).context("[pipeline]")?;
        let mut h = DefaultHasher::new();
        out.dense.values().hash(&mut h);
        let sum = h.finish();
        anyhow::ensure!(
            checksum.is_none_or(|c| c == sum),
            "output changed between frames"
        );
        checksum = Some(sum);
        runs.push(out.timings);
    }

    println!("{:<10} {:>10} {:>10}", "stage", "mean_ms", "median_ms");
    for (i, (name, _)) in runs[0].named().iter().enumerate() {
        let (mean, median) = mean_median(runs.iter().map(|t| ms(t.named()[i].1)).collect());
        println!("{name:<10} {mean:>10.2} {median:>10.2}");
    }
    let (mean, median) = mean_median(runs.iter().map(|t| ms(t.total())).collect());
    println!("{:<10} {mean:>10.2} {median:>10.2}", "total");
    let ops = count_ops(model.net());
    println!(
        "frames={} latency_ms={mean:.2} fps={:.3} ops_gop={:.2} gops={:.3} checksum={:016x}",
        args.frames,
        1000.0 / mean,
        ops as f64 / 1e9,
        ops as f64 / 1e9 / (mean / 1e3),
        checksum.unwrap_or(0)
    );
    Ok(())
}
