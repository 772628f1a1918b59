use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{ArgGroup, Args};
use depthnet::graph::Model;
use depthnet::lidar_io::{read_calib, read_kitti_bin, FrameQueue, LaserTable, UdpCapture};
use depthnet::pgm::write_pgm;
use depthnet::preprocess::{run_pipeline, Calibration, PipelineConfig, PipelineOutput, PointCloud};

use crate::{model, ModelArgs};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["bin", "udp"])))]
pub struct CompleteArgs {
    /// KITTI velodyne scan (.bin).
    #[arg(long, value_name = "PATH")]
    bin: Option<PathBuf>,
    /// Listen for VLP-16 packets on this UDP port.
    #[arg(long, value_name = "PORT")]
    udp: Option<u16>,
    /// KITTI calibration file with P2, R0_rect and Tr_velo_to_cam.
    #[arg(long, value_name = "PATH")]
    calib: PathBuf,
    #[arg(long, value_name = "PATH", default_value = "depth.pgm")]
    out: PathBuf,
    /// Live mode: number of revolutions to process.
    #[arg(long, default_value_t = 1)]
    frames: usize,
    /// Live mode: give up after this many seconds without enough frames.
    #[arg(long, value_name = "SECS", default_value_t = 30)]
    udp_timeout: u64,
    #[command(flatten)]
    model: ModelArgs,
}

pub fn run(args: &CompleteArgs) -> anyhow::Result<()> {
    let calib = read_calib(&args.calib).context("[calib] reading calibration")?;
    let model = model::build(&args.model)?;
    let cfg = PipelineConfig {
        scale_mm: args.model.scale,
    };
    if let Some(path) = &args.bin {
        let cloud = read_kitti_bin(path).context("[input] reading point cloud")?;
        let out = process(&cloud, &calib, &model, &cfg)?;
        save(&args.out, &out)?;
        return Ok(());
    }
    let port = args.udp.expect("clap enforces one source");
    live(args, port, &calib, &model, &cfg)
}

fn process(
    cloud: &PointCloud,
    calib: &Calibration,
    model: &Model,
    cfg: &PipelineConfig,
) -> anyhow::Result<PipelineOutput> {
    let out = run_pipeline(cloud, calib, model, cfg).context("[pipeline]")?;
    for (stage, t) in out.timings.named() {
        println!("stage {stage:<10} {:>9.2} ms", t.as_secs_f64() * 1e3);
    }
    println!("stage {:<10} {:>9.2} ms", "total", out.timings.total().as_secs_f64() * 1e3);
    println!(
        "points={} sparse_valid={} output={}x{}",
        cloud.len(),
        out.sparse.valid_count(),
        out.dense.width(),
        out.dense.height()
    );
    Ok(out)
}

fn save(path: &Path, out: &PipelineOutput) -> anyhow::Result<()> {
    write_pgm(path, &out.dense).context("[output] writing depth map")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn frame_path(base: &Path, index: usize, frames: usize) -> PathBuf {
    if frames == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("depth");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("pgm");
    base.with_file_name(format!("{stem}_{index:04}.{ext}"))
}

/// Capture runs on its own thread and hands whole revolutions over a
/// two-slot queue; this thread processes them as they arrive.
fn live(
    args: &CompleteArgs,
    port: u16,
    calib: &Calibration,
    model: &Model,
    cfg: &PipelineConfig,
) -> anyhow::Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
    let mut capture = UdpCapture::bind(addr, LaserTable::vlp16()).context("[capture]")?;
    println!("listening on {}", capture.local_addr().unwrap_or(addr));
    let queue = Arc::new(FrameQueue::new(2));
    let stop = Arc::new(AtomicBool::new(false));
    let worker = {
        let (queue, stop) = (queue.clone(), stop.clone());
        thread::spawn(move || {
            let stats = capture.run(&stop, &mut |cloud| {
                queue.push(cloud);
            });
            queue.close();
            stats
        })
    };

    let deadline = Instant::now() + Duration::from_secs(args.udp_timeout);
    let mut done = 0;
    let mut result = Ok(());
    while done < args.frames && Instant::now() < deadline {
        let Some(cloud) = queue.pop_timeout(Duration::from_millis(100)) else {
            if queue.is_closed() {
                break;
            }
            continue;
        };
        let frame = process(&cloud, calib, model, cfg).and_then(|out| {
            save(&frame_path(&args.out, done, args.frames), &out)
        });
        if let Err(e) = frame {
            result = Err(e);
            break;
        }
        done += 1;
    }
    stop.store(true, Ordering::Relaxed);
    let stats = worker
        .join()
        .map_err(|_| anyhow::anyhow!("[capture] thread panicked"))?
        .context("[capture]")?;
    println!(
        "datagrams={} malformed={} revolutions={} dropped={}",
        stats.datagrams,
        stats.malformed,
        stats.revolutions,
        queue.dropped()
    );
    result?;
    if done < args.frames {
        bail!("[capture] received {done} of {} frames before timeout", args.frames);
    }
    Ok(())
}
