//! Residual CNN with a long skip and an attention gate, regressing `(x, y)`
//! from per-TRP channel features.

mod check;
mod checkpoint;
mod model;
mod train;

pub use check::{format_table, gradient_suite, CHECKED_LAYERS};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use model::{build, build_ablation, param_count, Ablation, AttentionGate, LocNet, LocNetConfig, ResidualBlock};
pub use train::{dataset_loss, train, train_with_progress, write_history_csv, EpochRecord, LrSchedule, TrainConfig, TrainReport};
