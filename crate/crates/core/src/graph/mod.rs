//! The encoder-decoder network: table of blocks, weight store, forward pass
//! and parameter/operation counters for the standard and separable variants.

mod model;
mod spec;
mod weights;

pub use model::{forward, Activation, Model, Trace};
pub use spec::{
    build_depthnet, build_depthnet_sized, count_ops, count_params, BlockKind, BlockSpec, LayerOp,
    LayerSpec, NetworkSpec, ParamKind, ParamSpec, INPUT_HEIGHT, INPUT_WIDTH,
};
pub use weights::{bias_path, load_weights, load_weights_for, save_weights, Param, Weights};
