//! Minimal numeric engine: layers with forward/backward passes, Adam, losses
//! and finite-difference checking.

pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod layers;
pub mod linalg;
pub mod loss;
pub mod param;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::Conv2dSpec;
pub use gradcheck::{check_layer, grad_check, GradCheckReport, LayerCheck, Probe};
pub use layers::{backward, forward, Backward, ForwardCtx, LayerSpec, PoolSpec};
pub use loss::{loss_euclidean, loss_smooth_l1, LossConfig};
pub use param::{Param, ParamSet};
