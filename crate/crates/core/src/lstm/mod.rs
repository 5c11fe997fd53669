//! From-scratch stacked LSTM: model, losses, optimizers, training loop and
//! checkpoints. All arithmetic is `f64`.

pub mod checkpoint;
pub mod loss;
pub mod model;
pub mod optim;
pub mod train;

pub use checkpoint::Checkpoint;
pub use loss::{loss_logcosh, loss_mse, LossKind};
pub use model::{init_model, DropoutMasks, ForwardCache, Gradients, LstmLayer, LstmModel};
pub use optim::{adam_step, rmsprop_step, OptimizerKind, OptimizerState};
pub use train::{binary_accuracy, train, EpochStats, TrainConfig, TrainHistory};
