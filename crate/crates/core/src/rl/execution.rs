use super::reward::vwap;
use crate::lob::{OrderId, Price, Quantity, Side};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};

/// Inventory bookkeeping for an executing agent: outstanding child orders and
/// fills, both cumulative and for the current period.
#[derive(Clone, Debug, Default)]
pub struct ExecutionLedger {
    parent: Quantity,
    filled: Quantity,
    fills: Vec<(Price, Quantity)>,
    period: Vec<(Price, Quantity)>,
    open: BTreeMap<OrderId, Quantity>,
    max_committed: Quantity,
}

impl ExecutionLedger {
    pub fn new(parent: Quantity) -> Self {
        ExecutionLedger { parent, ..Default::default() }
    }

    pub fn parent(&self) -> Quantity {
        self.parent
    }

    pub fn filled(&self) -> Quantity {
        self.filled
    }

    /// Quantity still in flight at the exchange.
    pub fn pending(&self) -> Quantity {
        self.open.values().sum()
    }

    /// Inventory that may still be scheduled.
    pub fn remaining(&self) -> Quantity {
        self.parent.saturating_sub(self.filled + self.pending())
    }

    /// Largest `filled + pending` seen; never exceeds the parent quantity.
    pub fn max_committed(&self) -> Quantity {
        self.max_committed
    }

    pub fn open_orders(&self) -> Vec<OrderId> {
        self.open.keys().copied().collect()
    }

    pub fn on_submit(&mut self, order_id: OrderId, quantity: Quantity) {
        self.open.insert(order_id, quantity);
        self.max_committed = self.max_committed.max(self.filled + self.pending());
    }

    pub fn on_fill(&mut self, order_id: OrderId, price: Price, quantity: Quantity) {
        if let Some(left) = self.open.get_mut(&order_id) {
            *left = left.saturating_sub(quantity);
            if *left == 0 {
                self.open.remove(&order_id);
            }
        }
        self.filled += quantity;
        self.fills.push((price, quantity));
        self.period.push((price, quantity));
    }

    /// Cancelled or unfilled quantity for `order_id` left the market.
    pub fn on_cancelled(&mut self, order_id: OrderId, quantity: Quantity) {
        if let Some(left) = self.open.get_mut(&order_id) {
            *left = left.saturating_sub(quantity);
            if *left == 0 {
                self.open.remove(&order_id);
            }
        }
    }

    /// The order is no longer known to the exchange.
    pub fn on_rejected(&mut self, order_id: OrderId) {
        self.open.remove(&order_id);
    }

    pub fn take_period_fills(&mut self) -> Vec<(Price, Quantity)> {
        std::mem::take(&mut self.period)
    }

    pub fn fills(&self) -> &[(Price, Quantity)] {
        &self.fills
    }

    pub fn vwap(&self) -> Option<f64> {
        vwap(&self.fills)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub period: usize,
    pub time: SimTime,
    pub action: usize,
    pub multiplier: f64,
    pub scheduled: Quantity,
    pub filled: Quantity,
    pub reward: f64,
}

/// Outcome of one execution episode, shared by the learning agent and the
/// TWAP benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub side: Side,
    pub parent_quantity: Quantity,
    pub twap_child_quantity: Quantity,
    pub session_start: SimTime,
    pub session_end: SimTime,
    pub periods: usize,
    pub arrival_price: Option<f64>,
    pub filled_quantity: Quantity,
    pub vwap_fill_price: Option<f64>,
    pub total_reward: f64,
    pub actions: Vec<ActionRecord>,
    /// Inventory left at session end and sent as a closing market order.
    #[serde(default)]
    pub residual_quantity: Quantity,
    pub final_epsilon: f64,
    pub train_steps: u64,
    pub target_syncs: u64,
    pub mean_loss: Option<f64>,
    /// The episode ended early (e.g. the exchange was unreachable).
    pub aborted: bool,
}

impl EpisodeResult {
    /// `|VWAP - P_arrival| / P_arrival`.
    pub fn slippage(&self) -> Option<f64> {
        match (self.vwap_fill_price, self.arrival_price) {
            (Some(v), Some(a)) if a > 0.0 => Some((v - a).abs() / a),
            _ => None,
        }
    }

    pub fn fill_ratio(&self) -> f64 {
        if self.parent_quantity == 0 {
            return 0.0;
        }
        self.filled_quantity as f64 / self.parent_quantity as f64
    }

    pub fn write_action_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "period,time_ns,action,multiplier,scheduled,filled,reward")?;
        for a in &self.actions {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.period, a.time.0, a.action, a.multiplier, a.scheduled, a.filled, a.reward
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_tracks_pending_and_fills() {
        let mut l = ExecutionLedger::new(100);
        l.on_submit(1, 30);
        l.on_submit(2, 20);
        assert_eq!((l.pending(), l.remaining()), (50, 50));
        l.on_fill(1, 1000, 10);
        l.on_cancelled(1, 20);
        assert_eq!(l.open_orders(), vec![2]);
        assert_eq!((l.filled(), l.pending(), l.remaining()), (10, 20, 70));
        l.on_rejected(2);
        assert_eq!(l.remaining(), 90);
        assert_eq!(l.take_period_fills(), vec![(1000, 10)]);
        assert!(l.take_period_fills().is_empty());
        assert_eq!(l.max_committed(), 50);
    }
}
