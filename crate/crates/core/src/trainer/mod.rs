//! Small convolutional segment classifier, its gradients, mini-batch
//! training and the probability-averaging ensemble.
//!
//! Architecture: Conv1D (kernel 3, 16 channels, valid padding) -> ReLU ->
//! dropout -> max-pool (width 3, stride 3) -> mean over time -> dense 32 ->
//! ReLU -> dense 1 -> sigmoid.

mod checkpoint;
mod ensemble;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointSidecar, MODEL_MAGIC};
pub use ensemble::{ensemble_predict, Ensemble, Prediction, Standardizer};
pub use model::{batch_gradient, dropout_mask, forward, loss, ModelParams, CHANNELS, HIDDEN, KERNEL};
pub use train::{build_training_subset, train, train_ensemble, train_model, TrainConfig, TrainedModel};
