//! The execution MDP: state featurization, the action grid and order
//! scheduling, the per-period reward, and the replay buffer.

mod action;
mod buffer;
mod execution;
mod features;
mod reward;

pub use action::{round_half_up, schedule_orders, Action, ActionSpace, ChildOrder, Placement, PLACEMENTS};
pub use buffer::{BufferError, Experience, ReplayBuffer};
pub use execution::{ActionRecord, EpisodeResult, ExecutionLedger};
pub use features::{featurize, Featurized, PriceHistory, PrivateState, StateVector, FEATURE_COUNT};
pub use reward::{compute_reward, vwap, RewardParams};
