use crate::agents::OrderIds;
use crate::kernel::{Agent, AgentContext, AgentError, Message, Payload};
use crate::lob::{AgentId, OrderId, Quantity, Side};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentumConfig {
    pub short_window: usize,
    pub long_window: usize,
    pub order_size: Quantity,
    pub poll_interval: SimTime,
    /// Delay of the first poll after the kernel starts.
    pub start_offset: SimTime,
    /// Cancel the agent's previous resting order before placing a new one.
    pub cancel_previous: bool,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        MomentumConfig {
            short_window: 20,
            long_window: 50,
            order_size: 100,
            poll_interval: SimTime::from_secs(1),
            start_offset: SimTime::ZERO,
            cancel_previous: true,
        }
    }
}

impl MomentumConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.short_window == 0 || self.short_window >= self.long_window {
            return Err(format!(
                "short_window ({}) must be positive and below long_window ({})",
                self.short_window, self.long_window
            ));
        }
        if self.order_size == 0 || self.poll_interval == SimTime::ZERO {
            return Err("order_size and poll_interval must be positive".into());
        }
        Ok(())
    }
}

/// Compare the mean of the last `short` mid-prices with the mean of the last
/// `long`: buy when the short mean is higher, sell when lower, nothing on a
/// tie or with fewer than `long` observations.
pub fn momentum_decide(history: &[f64], short: usize, long: usize) -> Option<Side> {
    if history.len() < long || short == 0 || short > long {
        return None;
    }
    let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    let short_mean = mean(&history[history.len() - short..]);
    let long_mean = mean(&history[history.len() - long..]);
    if short_mean > long_mean {
        Some(Side::Bid)
    } else if short_mean < long_mean {
        Some(Side::Ask)
    } else {
        None
    }
}

/// Polls the mid-price and joins the touch on the side the momentum signal
/// points to.
pub struct MomentumAgent {
    config: MomentumConfig,
    exchange: AgentId,
    history: VecDeque<f64>,
    ids: Option<OrderIds>,
    open: Option<(OrderId, Quantity)>,
    orders_placed: u64,
}

impl MomentumAgent {
    pub fn new(exchange: AgentId, config: MomentumConfig) -> Self {
        MomentumAgent { config, exchange, history: VecDeque::new(), ids: None, open: None, orders_placed: 0 }
    }

    pub fn orders_placed(&self) -> u64 {
        self.orders_placed
    }
}

impl Agent for MomentumAgent {
    fn name(&self) -> &str {
        "momentum"
    }

    fn on_start(&mut self, ctx: &mut AgentContext<'_>) -> Result<(), AgentError> {
        self.ids = Some(OrderIds::for_agent(ctx.id()));
        ctx.wakeup_at(ctx.now() + self.config.start_offset)?;
        Ok(())
    }

    fn on_message(&mut self, ctx: &mut AgentContext<'_>, msg: &Message) -> Result<(), AgentError> {
        match &msg.payload {
            Payload::Wakeup => {
                ctx.send(self.exchange, Payload::MarketDataQuery { depth: 1 })?;
                ctx.wakeup_at(ctx.now() + self.config.poll_interval)?;
            }
            Payload::MarketDataReply { snapshot } => {
                let Some(mid) = snapshot.mid_price() else { return Ok(()) };
                self.history.push_back(mid);
                while self.history.len() > self.config.long_window {
                    self.history.pop_front();
                }
                let history = self.history.make_contiguous();
                let Some(side) = momentum_decide(history, self.config.short_window, self.config.long_window) else {
                    return Ok(());
                };
                let Some(touch) = snapshot.best(side) else { return Ok(()) };
                if self.config.cancel_previous {
                    if let Some((id, _)) = self.open.take() {
                        ctx.send(self.exchange, Payload::CancelOrder { order_id: id })?;
                    }
                }
                let order_id = self.ids.as_mut().expect("ids assigned at start").next_id();
                ctx.send(
                    self.exchange,
                    Payload::LimitOrder { order_id, side, price: touch.price, quantity: self.config.order_size },
                )?;
                self.open = Some((order_id, self.config.order_size));
                self.orders_placed += 1;
            }
            Payload::OrderExecuted { order_id, fill } => {
                if let Some((id, left)) = self.open {
                    if id == *order_id {
                        let left = left.saturating_sub(fill.quantity);
                        self.open = (left > 0).then_some((id, left));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn final_state(&self) -> serde_json::Value {
        serde_json::json!({ "orders_placed": self.orders_placed })
    }

    fn into_any(self: Box<Self>) -> Box<dyn Any> {
        self
    }
}
