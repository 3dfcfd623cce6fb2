//! Loss, optimiser, metrics and the minibatch training loop.

pub mod adam;
pub mod loss;
pub mod metrics;
pub mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use loss::{cross_entropy_loss, CrossEntropy};
pub use metrics::Metrics;
pub use trainer::{batch_gradient, evaluate, train, EpochLog, TrainConfig, TrainOutcome};
