//! Masked autoregressive flows built from MADE conditioners.

mod made;
mod maf;
mod mask;
mod train;

pub use made::{layer_forward, layer_inverse, made_forward, soft_clamp, Activation, MadeNetwork};
pub use maf::{maf_log_density, maf_log_density_batch, maf_sample, MafArch, MafModel};
pub use mask::{build_masks, identity_ordering, reversed_ordering, validate_ordering, MaskSpec};
pub use train::{maf_train, nll_gradient, Adam, FlowFit, FlowTrainConfig};
