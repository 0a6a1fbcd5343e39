use crate::kernel::{Agent, AgentContext, AgentError, Message, Payload};
use crate::lob::{AgentId, BookError, Order, OrderBook, Price, SelfTradePolicy, SubmitOutcome};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::any::Any;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BboRecord {
    pub time: SimTime,
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeStats {
    pub limit_orders: u64,
    pub market_orders: u64,
    pub cancels: u64,
    pub reductions: u64,
    pub fills: u64,
    pub filled_quantity: u64,
    pub rejected: u64,
    pub queries: u64,
}

/// Keeps the order book and answers order actions and market-data queries.
pub struct ExchangeAgent {
    book: OrderBook,
    record_bbo: bool,
    bbo: Vec<BboRecord>,
    stats: ExchangeStats,
}

impl ExchangeAgent {
    pub fn new(policy: SelfTradePolicy) -> Self {
        ExchangeAgent { book: OrderBook::with_self_trade_policy(policy), record_bbo: false, bbo: Vec::new(), stats: ExchangeStats::default() }
    }

    /// Record best bid/ask after every order action.
    pub fn recording_bbo(mut self) -> Self {
        self.record_bbo = true;
        self
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn bbo_trace(&self) -> &[BboRecord] {
        &self.bbo
    }

    pub fn stats(&self) -> &ExchangeStats {
        &self.stats
    }

    fn reject(&mut self, to: AgentId, order_id: u64, err: BookError) -> Vec<(AgentId, Payload)> {
        self.stats.rejected += 1;
        vec![(to, Payload::OrderRejected { order_id, reason: err.to_string() })]
    }

    fn report(&mut self, sender: AgentId, order_id: u64, outcome: SubmitOutcome) -> Vec<(AgentId, Payload)> {
        let mut out = Vec::with_capacity(2 * outcome.fills.len() + 1);
        for fill in outcome.fills {
            self.stats.fills += 1;
            self.stats.filled_quantity += fill.quantity;
            out.push((fill.taker_agent_id, Payload::OrderExecuted { order_id: fill.taker_order_id, fill: fill.clone() }));
            out.push((fill.maker_agent_id, Payload::OrderExecuted { order_id: fill.maker_order_id, fill }));
        }
        if let Some(order) = outcome.resting {
            out.push((sender, Payload::OrderAccepted { order }));
        }
        if outcome.unfilled > 0 {
            out.push((sender, Payload::OrderCancelled { order_id, quantity: outcome.unfilled }));
        }
        out
    }

    fn owned(&self, sender: AgentId, order_id: u64) -> Result<(), BookError> {
        match self.book.order(order_id) {
            Some(o) if o.agent_id == sender => Ok(()),
            _ => Err(BookError::UnknownOrder(order_id)),
        }
    }

    /// Apply one incoming message and return the replies to send.
    pub fn handle(&mut self, msg: &Message, now: SimTime) -> Vec<(AgentId, Payload)> {
        let sender = msg.sender;
        let replies = match msg.payload {
            Payload::LimitOrder { order_id, side, price, quantity } => {
                self.stats.limit_orders += 1;
                match self.book.submit(Order::limit(order_id, sender, side, price, quantity, now)) {
                    Ok(outcome) => self.report(sender, order_id, outcome),
                    Err(e) => self.reject(sender, order_id, e),
                }
            }
            Payload::MarketOrder { order_id, side, quantity } => {
                self.stats.market_orders += 1;
                match self.book.submit(Order::market(order_id, sender, side, quantity, now)) {
                    Ok(outcome) => self.report(sender, order_id, outcome),
                    Err(e) => self.reject(sender, order_id, e),
                }
            }
            Payload::CancelOrder { order_id } => {
                self.stats.cancels += 1;
                match self.owned(sender, order_id).and_then(|_| self.book.cancel(order_id)) {
                    Ok(order) => vec![(sender, Payload::OrderCancelled { order_id, quantity: order.quantity })],
                    Err(e) => self.reject(sender, order_id, e),
                }
            }
            Payload::ReduceOrder { order_id, by } => {
                self.stats.reductions += 1;
                let before = self.book.order(order_id).map_or(0, |o| o.quantity);
                match self.owned(sender, order_id).and_then(|_| self.book.reduce(order_id, by)) {
                    Ok(left) => vec![(sender, Payload::OrderCancelled { order_id, quantity: before - left })],
                    Err(e) => self.reject(sender, order_id, e),
                }
            }
            Payload::MarketDataQuery { depth } => {
                self.stats.queries += 1;
                return vec![(sender, Payload::MarketDataReply { snapshot: self.book.snapshot(depth.max(1)) })];
            }
            _ => return Vec::new(),
        };
        if self.record_bbo {
            self.bbo.push(BboRecord {
                time: now,
                best_bid: self.book.best_bid().map(|l| l.price),
                best_ask: self.book.best_ask().map(|l| l.price),
            });
        }
        replies
    }
}

impl Agent for ExchangeAgent {
    fn name(&self) -> &str {
        "exchange"
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        for (to, payload) in self.handle(msg, ctx.now()) {
            ctx.send(to, payload)?;
        }
        Ok(())
    }

    fn final_state(&self) -> serde_json::Value {
        serde_json::json!({
            "stats": self.stats,
            "best_bid": self.book.best_bid(),
            "best_ask": self.book.best_ask(),
            "resting_orders": self.book.len(),
        })
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}
