//! Price-time priority limit order book.
//!
//! Prices are integer ticks (one tick is $0.0001, the LOBSTER scaling), so all
//! matching arithmetic is exact. Each side is an ordered map from price to a
//! FIFO queue of resting orders.

mod book;
#[cfg(any(test, feature = "oracles"))]
pub mod reference;

pub use book::{OrderBook, SelfTradePolicy};

use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Price = i64;
pub type Quantity = u64;
pub type OrderId = u64;
pub type AgentId = usize;

/// Ticks per dollar in the LOBSTER price convention.
pub const TICKS_PER_DOLLAR: i64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    Limit,
    Market,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: OrderId,
    pub agent_id: AgentId,
    pub side: Side,
    /// Ignored for market orders.
    pub price: Price,
    pub quantity: Quantity,
    pub kind: OrderKind,
    pub placed_at: SimTime,
}

impl Order {
    pub fn limit(
        order_id: OrderId,
        agent_id: AgentId,
        side: Side,
        price: Price,
        quantity: Quantity,
        placed_at: SimTime,
    ) -> Self {
        Order { order_id, agent_id, side, price, quantity, kind: OrderKind::Limit, placed_at }
    }

    pub fn market(
        order_id: OrderId,
        agent_id: AgentId,
        side: Side,
        quantity: Quantity,
        placed_at: SimTime,
    ) -> Self {
        Order { order_id, agent_id, side, price: 0, quantity, kind: OrderKind::Market, placed_at }
    }

    pub fn validate(&self) -> Result<(), BookError> {
        if self.quantity == 0 {
            return Err(BookError::InvalidQuantity(self.order_id));
        }
        if self.kind == OrderKind::Limit && self.price <= 0 {
            return Err(BookError::InvalidPrice(self.order_id, self.price));
        }
        Ok(())
    }

    /// Whether a limit order at this price would trade against `opposite_best`.
    pub fn crosses(&self, opposite_best: Price) -> bool {
        match (self.kind, self.side) {
            (OrderKind::Market, _) => true,
            (OrderKind::Limit, Side::Bid) => self.price >= opposite_best,
            (OrderKind::Limit, Side::Ask) => self.price <= opposite_best,
        }
    }
}

/// One execution between an incoming (taker) order and a resting (maker) order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub taker_order_id: OrderId,
    pub maker_order_id: OrderId,
    pub taker_agent_id: AgentId,
    pub maker_agent_id: AgentId,
    /// Side of the taker.
    pub taker_side: Side,
    pub price: Price,
    pub quantity: Quantity,
    pub at: SimTime,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubmitOutcome {
    pub fills: Vec<Fill>,
    /// Limit remainder now resting in the book.
    pub resting: Option<Order>,
    /// Quantity neither filled nor rested: a market remainder, or a taker
    /// remainder stopped by self-trade prevention.
    pub unfilled: Quantity,
}

impl SubmitOutcome {
    pub fn filled_quantity(&self) -> Quantity {
        self.fills.iter().map(|f| f.quantity).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: Price,
    pub quantity: Quantity,
    pub order_count: usize,
}

/// Read-only top-of-book view, copied out of the book.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    /// Best first (descending price).
    pub bids: Vec<Level>,
    /// Best first (ascending price).
    pub asks: Vec<Level>,
    pub last_trade_price: Option<Price>,
}

impl BookSnapshot {
    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn side(&self, side: Side) -> &[Level] {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    pub fn best(&self, side: Side) -> Option<Level> {
        self.side(side).first().copied()
    }

    /// Mid-price in ticks, when both sides are present.
    pub fn mid_price(&self) -> Option<f64> {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => Some((b.price + a.price) as f64 / 2.0),
            _ => None,
        }
    }

    pub fn spread(&self) -> Option<Price> {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => Some(a.price - b.price),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("duplicate order id {0}")]
    DuplicateOrderId(OrderId),
    #[error("order {0} has zero quantity")]
    InvalidQuantity(OrderId),
    #[error("order {0} has invalid limit price {1}")]
    InvalidPrice(OrderId, Price),
    #[error("order {0} is not resting in the book")]
    UnknownOrder(OrderId),
}
