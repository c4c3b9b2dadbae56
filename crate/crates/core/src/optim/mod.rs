//! Loss, optimizer, learning-rate schedules and the training loop.

mod loss;
mod schedule;
mod sgd;
mod train;

pub use loss::euclidean_loss;
pub use schedule::{lr_at, Schedule, DEEP_PREDICTIONS_PER_IMAGE};
pub use sgd::{apply_maxnorm, sgd_nesterov_step, OptState, SgdConfig};
pub use train::{dataset_loss, dataset_mse, train, IterRecord, Stop, TrainConfig, TrainHistory, TrainObserver};
