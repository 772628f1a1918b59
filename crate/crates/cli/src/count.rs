use clap::Args;
use depthnet::graph::{build_depthnet, count_ops, count_params, NetworkSpec};

#[derive(Args, Debug)]
pub struct CountArgs {
    /// Show the per-layer table of the separable network.
    #[arg(long)]
    ds: bool,
}

fn gop(ops: u64) -> String {
    format!("{:.2}", ops as f64 / 1e9)
}

pub fn run(args: &CountArgs) -> anyhow::Result<()> {
    let (std_net, ds_net) = (build_depthnet(false), build_depthnet(true));
    let (ps, pd) = (count_params(&std_net), count_params(&ds_net));
    println!("{:<10} {:>10} {:>10}", "network", "params", "GOP");
    println!("{:<10} {:>10} {:>10}", "standard", ps, gop(count_ops(&std_net)));
    println!("{:<10} {:>10} {:>10}", "separable", pd, gop(count_ops(&ds_net)));
    println!("reduction factor {:.2}", ps as f64 / pd as f64);
    println!();
    table(if args.ds { &ds_net } else { &std_net });
    Ok(())
}

fn table(net: &NetworkSpec) {
    println!(
        "{:<26} {:>5} {:>5} {:>3} {:>14} {:>14} {:>9} {:>8}",
        "layer", "m", "n", "s", "input", "output", "params", "GOP"
    );
    for b in &net.blocks {
        let layers = b.layers();
        let (h, w, c) = b.input_shape();
        let (oh, ow, oc) = b.output_shape();
        let params: usize = layers.iter().map(|l| l.param_count()).sum();
        let ops: u64 = layers.iter().map(|l| l.ops()).sum();
        println!(
            "{:<26} {:>5} {:>5} {:>3} {:>14} {:>14} {:>9} {:>8}",
            b.name,
            b.m,
            b.n,
            b.stride,
            format!("{h}x{w}x{c}"),
            format!("{oh}x{ow}x{oc}"),
            params,
            gop(ops)
        );
        for l in &layers {
            for p in l.params() {
                println!(
                    "  {:<24} {:>5} {:>5} {:>3} {:>14} {:>14} {:>9} {:>8}",
                    p.path,
                    "",
                    "",
                    "",
                    "",
                    "",
                    p.kind.tap_count() + p.kind.bias_len(),
                    gop(2 * p.macs)
                );
            }
        }
    }
}
