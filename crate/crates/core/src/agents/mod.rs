//! Non-learning agents: the exchange, LOBSTER market replay, momentum traders
//! and the TWAP execution benchmark.

mod exchange;
mod momentum;
mod replay;
mod twap;

pub use exchange::{BboRecord, ExchangeAgent, ExchangeStats};
pub use momentum::{momentum_decide, MomentumAgent, MomentumConfig};
pub use replay::{ReplayAgent, ReplayStats};
pub use twap::{twap_schedule, TwapAgent, TwapConfig, TwapError};

use crate::lob::{AgentId, OrderId};

const AGENT_ID_SHIFT: u32 = 44;
const LOCAL_COUNTER_BASE: u64 = 1 << 43;

/// Exchange-wide unique order ids: each agent owns the block
/// `(agent_id + 1) << 44`. The lower half of a block is reserved for ids
/// carried over from data files, the upper half for locally generated ids.
#[derive(Clone, Debug)]
pub struct OrderIds {
    base: OrderId,
    next: u64,
}

impl OrderIds {
    pub fn for_agent(agent: AgentId) -> Self {
        OrderIds { base: (agent as u64 + 1) << AGENT_ID_SHIFT, next: LOCAL_COUNTER_BASE }
    }

    pub fn next_id(&mut self) -> OrderId {
        let id = self.base | self.next;
        self.next += 1;
        id
    }

    /// Map an external (e.g. LOBSTER) id into this agent's block.
    pub fn external(&self, id: u64) -> OrderId {
        debug_assert!(id < LOCAL_COUNTER_BASE, "external id {id} out of range");
        self.base | id
    }
}
