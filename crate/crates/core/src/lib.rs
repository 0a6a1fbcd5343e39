//! Discrete-event limit order book market simulator with a double deep
//! Q-learning execution agent.
//!
//! The crate is layered bottom-up:
//!
//! - [`kernel`]: deterministic event loop delivering timestamped messages.
//! - [`lob`]: price-time priority matching engine.
//! - [`lobster`]: LOBSTER message files and a seeded synthetic flow generator.
//! - [`agents`]: exchange, market replay, momentum and TWAP agents.
//! - [`rl`]: execution MDP (features, action grid, reward, replay buffer).
//! - [`mlp`]: hand-differentiated Q-network with RMSprop.
//! - [`ddql`]: the learning execution agent and its training loop.
//! - [`realism`]: order-flow stylized facts and execution reports.

pub mod agents;
pub mod ddql;
pub mod kernel;
pub mod lob;
pub mod lobster;
pub mod mlp;
pub mod realism;
pub mod rl;
pub mod rng;
pub mod scenario;
pub mod time;

pub use time::SimTime;
