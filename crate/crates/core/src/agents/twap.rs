use super::OrderIds;
use crate::kernel::{Agent, AgentContext, AgentError, Message, Payload};
use crate::lob::{AgentId, Quantity, Side};
use crate::rl::{compute_reward, ActionRecord, ActionSpace, EpisodeResult, ExecutionLedger, RewardParams};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::any::Any;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwapConfig {
    pub parent_quantity: Quantity,
    pub side: Side,
    pub session_start: SimTime,
    pub session_end: SimTime,
    pub period: SimTime,
    /// Reward scale used when scoring the benchmark like the learning agent.
    pub lambda: f64,
}

impl Default for TwapConfig {
    fn default() -> Self {
        TwapConfig {
            parent_quantity: 6_600,
            side: Side::Bid,
            session_start: SimTime::from_hms(10, 0, 0),
            session_end: SimTime::from_hms(15, 30, 0),
            period: SimTime::from_secs(30),
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TwapError {
    #[error("parent quantity must be positive")]
    ZeroQuantity,
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("session end must follow session start")]
    EmptySession,
    #[error("session length {session} ns is not a multiple of the period {period} ns")]
    UnevenPeriods { session: u64, period: u64 },
}

impl TwapConfig {
    pub fn num_periods(&self) -> Result<usize, TwapError> {
        if self.parent_quantity == 0 {
            return Err(TwapError::ZeroQuantity);
        }
        if self.period == SimTime::ZERO {
            return Err(TwapError::ZeroPeriod);
        }
        if self.session_end <= self.session_start {
            return Err(TwapError::EmptySession);
        }
        let session = (self.session_end - self.session_start).0;
        if !session.is_multiple_of(self.period.0) {
            return Err(TwapError::UnevenPeriods { session, period: self.period.0 });
        }
        Ok((session / self.period.0) as usize)
    }
}

/// One `(boundary time, child quantity)` per period. Quantities differ by at
/// most one share, the remainder going to the earliest periods.
pub fn twap_schedule(config: &TwapConfig) -> Result<Vec<(SimTime, Quantity)>, TwapError> {
    let n = config.num_periods()?;
    let base = config.parent_quantity / n as Quantity;
    let extra = (config.parent_quantity % n as Quantity) as usize;
    Ok((0..n)
        .map(|i| {
            let t = config.session_start + SimTime(config.period.0 * i as u64);
            (t, base + Quantity::from(i < extra))
        })
        .collect())
}

/// Submits the TWAP schedule as market orders at each period boundary.
pub struct TwapAgent {
    config: TwapConfig,
    exchange: AgentId,
    schedule: Vec<(SimTime, Quantity)>,
    next: usize,
    ids: Option<OrderIds>,
    ledger: ExecutionLedger,
    arrival_price: Option<f64>,
    records: Vec<ActionRecord>,
    twap_action: usize,
}

impl TwapAgent {
    pub fn new(exchange: AgentId, config: TwapConfig) -> Result<Self, TwapError> {
        let schedule = twap_schedule(&config)?;
        let twap_action = ActionSpace::default().twap_action().map_or(0, |a| a.index);
        Ok(TwapAgent {
            ledger: ExecutionLedger::new(config.parent_quantity),
            config,
            exchange,
            schedule,
            next: 0,
            ids: None,
            arrival_price: None,
            records: Vec::new(),
            twap_action,
        })
    }

    fn close_period(&mut self) {
        let fills = self.ledger.take_period_fills();
        if let Some(last) = self.records.last_mut() {
            last.filled = fills.iter().map(|f| f.1).sum();
            last.reward = match self.arrival_price {
                Some(arrival) => compute_reward(
                    &fills,
                    &RewardParams { lambda: self.config.lambda, parent_quantity: self.config.parent_quantity, arrival_price: arrival },
                ),
                None => 0.0,
            };
        }
    }

    pub fn result(&self) -> EpisodeResult {
        let n = self.schedule.len();
        EpisodeResult {
            side: self.config.side,
            parent_quantity: self.config.parent_quantity,
            twap_child_quantity: self.config.parent_quantity / n.max(1) as Quantity,
            session_start: self.config.session_start,
            session_end: self.config.session_end,
            periods: n,
            arrival_price: self.arrival_price,
            filled_quantity: self.ledger.filled(),
            vwap_fill_price: self.ledger.vwap(),
            total_reward: self.records.iter().map(|r| r.reward).sum(),
            actions: self.records.clone(),
            residual_quantity: 0,
            final_epsilon: 0.0,
            train_steps: 0,
            target_syncs: 0,
            mean_loss: None,
            aborted: self.next < n,
        }
    }
}

impl Agent for TwapAgent {
    fn name(&self) -> &str {
        "twap"
    }

    fn on_start(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.ids = Some(OrderIds::for_agent(ctx.id()));
        ctx.wakeup_at(self.config.session_start.max(ctx.now()))?;
        Ok(())
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::Wakeup => {
                if self.next == 0 {
                    ctx.send(self.exchange, Payload::MarketDataQuery { depth: 1 })?;
                }
                self.close_period();
                let Some(&(t, qty)) = self.schedule.get(self.next) else { return Ok(()) };
                let period = self.next;
                self.next += 1;
                if qty > 0 {
                    let order_id = self.ids.as_mut().expect("ids assigned at start").next_id();
                    ctx.send(self.exchange, Payload::MarketOrder { order_id, side: self.config.side, quantity: qty })?;
                    self.ledger.on_submit(order_id, qty);
                }
                self.records.push(ActionRecord {
                    period,
                    time: t,
                    action: self.twap_action,
                    multiplier: 1.0,
                    scheduled: qty,
                    filled: 0,
                    reward: 0.0,
                });
                let next_boundary = self.schedule.get(self.next).map_or(self.config.session_end, |s| s.0);
                ctx.wakeup_at(next_boundary)?;
            }
            Payload::MarketDataReply { snapshot } => {
                if self.arrival_price.is_none() {
                    self.arrival_price = snapshot.mid_price();
                }
            }
            Payload::OrderExecuted { order_id, fill } => self.ledger.on_fill(*order_id, fill.price, fill.quantity),
            Payload::OrderCancelled { order_id, quantity } => self.ledger.on_cancelled(*order_id, *quantity),
            Payload::OrderRejected { order_id, .. } => self.ledger.on_rejected(*order_id),
            _ => {}
        }
        Ok(())
    }

    fn final_state(&self) -> serde_json::Value {
        serde_json::json!({
            "filled": self.ledger.filled(),
            "vwap": self.ledger.vwap(),
            "arrival_price": self.arrival_price,
        })
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}
