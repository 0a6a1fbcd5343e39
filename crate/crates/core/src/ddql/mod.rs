//! Double deep Q-learning execution agent.

mod agent;
mod checkpoint;
mod config;
mod learner;
mod train;

pub use agent::DdqlAgent;
pub use checkpoint::CheckpointError;
pub use config::DdqlConfig;
pub use learner::{argmax, compute_target, encode_state, select_action, Learner};
pub use train::{
    checkpoint_path, evaluate, latest_checkpoint, learning_curve_row, run_episode, run_twap_episode, train,
    EpisodeSetup, TrainError, TrainReport, LEARNING_CURVE_HEADER,
};
