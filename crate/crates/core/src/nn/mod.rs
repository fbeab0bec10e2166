//! Minimal 1D convolutional network with manual backpropagation, binary
//! cross-entropy and Adam.

mod adam;
mod checkpoint;
mod layers;
mod network;
mod tensor;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{bce_with_logit, sigmoid, Conv1d, Dense, Layer, LayerSpec, LayerTape};
pub use network::{ForwardPass, Gradients, Network, NetworkSpec};
pub use tensor::{Scalar, Tensor1D};
pub use train::{classify, clip_tensor, mean_loss, predict, train, train_spec, EpochStats, TrainConfig, TrainOutcome};
