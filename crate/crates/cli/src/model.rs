use anyhow::Context;
use depthnet::graph::{build_depthnet, load_weights_for, Model, Weights};
use depthnet::kernels::TileConfig;
use depthnet::Precision;

use crate::ModelArgs;

pub fn precision(args: &ModelArgs) -> anyhow::Result<Precision> {
    if !args.fixed {
        return Ok(Precision::Real);
    }
    Ok(Precision::fixed(args.qf, args.qf.default_accumulator())?)
}

pub fn build(args: &ModelArgs) -> anyhow::Result<Model> {
    let net = build_depthnet(args.ds);
    let weights = match &args.weights {
        Some(path) => load_weights_for(path, &net).context("[weights] loading")?,
        None => Weights::random_init(&net, args.seed),
    };
    let tile = TileConfig::with_partition(args.tile).context("[config] --tile")?;
    let model = Model::new(&net, &weights, precision(args)?)
        .context("[weights] binding")?
        .with_tiling(tile)?;
    Ok(model)
}
