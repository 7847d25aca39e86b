//! MvANet architecture: channel plans, composite blocks and the assembled
//! model.

mod blocks;
mod count;
mod dump;
mod hparams;
mod model;
mod plan;

pub use blocks::{AttentionLayer, SeGate, StemBranch, VisualLayer, VisualReceptor};
pub use count::{count_parameters, ParamCount};
pub use dump::{dump_activations, mean_map_u8};
pub use hparams::{ArchHyperParams, PRESETS};
pub use model::{build_model, Model, Trace, INPUT_CHANNELS};
pub use plan::{alpha, bottleneck_width, channel_plan, channel_plan_with, ChannelPlan, LayerPlan};
