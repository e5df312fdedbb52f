//! Layer-list CNN engine with reverse-mode gradients and Adam.
//!
//! Networks are sequential lists of [`LayerSpec`] (with residual blocks as
//! the one branching construct). Forward and backward are single-threaded
//! and bit-deterministic for a given seed.

mod adam;
mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod network;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, grad_check_against, GradCheckOptions, GradCheckReport};
pub use layer::{count_params, infer_shape, LayerSpec};
pub use loss::{softmax, softmax_cross_entropy};
pub use network::{Cache, Mode, Network};
pub use tensor::Tensor;
