//! Initialization, optimizer, schedule, augmentation and the epoch loop.

mod augment;
mod init;
mod schedule;
mod sgd;
mod trainer;

pub use augment::{augment, Augmentation};
pub use init::he_init;
pub use schedule::{lr_at_epoch, TrainConfig};
pub use sgd::Sgd;
pub use trainer::{
    log_csv, train, train_with, EpochLog, TrainOutcome, LOG_HEADER, VALIDATION_FRACTION,
};
