use super::OrderIds;
use crate::kernel::{Agent, AgentContext, AgentError, Message, Payload};
use crate::lob::AgentId;
use crate::lobster::{EventType, LobsterEvent};
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::sync::Arc;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub submitted: u64,
    /// Visible executions replayed as market orders.
    pub executions_as_market: u64,
    pub skipped_hidden: u64,
    pub skipped_cross: u64,
    pub skipped_halt: u64,
    pub rejected: u64,
}

/// Re-submits a LOBSTER message stream to the exchange at the recorded times.
///
/// New limits, partial cancels and deletes map one-to-one onto order actions.
/// A visible execution is realized as a market order of the executed size from
/// the opposite side, so the book stays consistent with its own matching.
/// Hidden executions, cross trades and halts are skipped and counted.
pub struct ReplayAgent {
    exchange: AgentId,
    events: Arc<Vec<LobsterEvent>>,
    cursor: usize,
    ids: Option<OrderIds>,
    stats: ReplayStats,
}

impl ReplayAgent {
    pub fn new(exchange: AgentId, events: Arc<Vec<LobsterEvent>>) -> Self {
        ReplayAgent { exchange, events, cursor: 0, ids: None, stats: ReplayStats::default() }
    }

    pub fn stats(&self) -> &ReplayStats {
        &self.stats
    }

    fn replay(&mut self, ctx: &mut AgentContext<'_>, e: LobsterEvent) -> Result<(), AgentError> {
        let ids = self.ids.as_mut().expect("ids assigned at start");
        let payload = match e.event_type {
            EventType::NewLimit => Payload::LimitOrder {
                order_id: ids.external(e.order_id),
                side: e.direction.side(),
                price: e.price,
                quantity: e.size,
            },
            EventType::PartialCancel => Payload::ReduceOrder { order_id: ids.external(e.order_id), by: e.size },
            EventType::Delete => Payload::CancelOrder { order_id: ids.external(e.order_id) },
            EventType::VisibleExecution => {
                self.stats.executions_as_market += 1;
                log::trace!("execution of order {} replayed as a market order", e.order_id);
                Payload::MarketOrder { order_id: ids.next_id(), side: e.direction.side().opposite(), quantity: e.size }
            }
            EventType::HiddenExecution => {
                self.stats.skipped_hidden += 1;
                return Ok(());
            }
            EventType::CrossTrade => {
                self.stats.skipped_cross += 1;
                return Ok(());
            }
            EventType::Halt => {
                self.stats.skipped_halt += 1;
                return Ok(());
            }
        };
        self.stats.submitted += 1;
        ctx.send(self.exchange, payload)?;
        Ok(())
    }

    fn schedule_next(&self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        if let Some(e) = self.events.get(self.cursor) {
            ctx.wakeup_at(e.time.max(ctx.now()))?;
        }
        Ok(())
    }
}

impl Agent for ReplayAgent {
    fn name(&self) -> &str {
        "market_replay"
    }

    fn on_start(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.ids = Some(OrderIds::for_agent(ctx.id()));
        self.schedule_next(ctx)
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        match msg.payload {
            Payload::Wakeup => {
                while let Some(&e) = self.events.get(self.cursor) {
                    if e.time > ctx.now() {
                        break;
                    }
                    self.cursor += 1;
                    self.replay(ctx, e)?;
                }
                self.schedule_next(ctx)
            }
            Payload::OrderRejected { .. } => {
                self.stats.rejected += 1;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn final_state(&self) -> serde_json::Value {
        serde_json::json!({ "stats": self.stats, "replayed": self.cursor })
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}
