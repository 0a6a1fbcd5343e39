//! Naive reference matcher: a flat list of resting orders scanned linearly on
//! every operation. Used only as an oracle for [`super::OrderBook`].

use super::{BookError, Fill, Order, OrderId, OrderKind, Quantity, SelfTradePolicy, Side, SubmitOutcome};
use std::collections::HashSet;

#[derive(Clone, Debug, Default)]
pub struct ReferenceBook {
    /// Resting orders in arrival order.
    resting: Vec<Order>,
    seen: HashSet<OrderId>,
    self_trade: SelfTradePolicy,
}

impl ReferenceBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_self_trade_policy(policy: SelfTradePolicy) -> Self {
        ReferenceBook { self_trade: policy, ..Self::default() }
    }

    /// Index of the highest-priority resting order on `side`: best price, then
    /// earliest arrival.
    fn best_index(&self, side: Side) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.resting.iter().enumerate() {
            if o.side != side {
                continue;
            }
            let better = match best {
                None => true,
                Some(j) => {
                    let b = &self.resting[j];
                    match side {
                        Side::Bid => o.price > b.price,
                        Side::Ask => o.price < b.price,
                    }
                }
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    pub fn submit(&mut self, order: Order) -> Result<SubmitOutcome, BookError> {
        order.validate()?;
        if self.seen.contains(&order.order_id) {
            return Err(BookError::DuplicateOrderId(order.order_id));
        }
        self.seen.insert(order.order_id);
        let mut remaining = order.quantity;
        let mut fills = Vec::new();
        let mut blocked = false;
        while remaining > 0 {
            let Some(i) = self.best_index(order.side.opposite()) else { break };
            let maker_price = self.resting[i].price;
            let marketable = match (order.kind, order.side) {
                (OrderKind::Market, _) => true,
                (OrderKind::Limit, Side::Bid) => order.price >= maker_price,
                (OrderKind::Limit, Side::Ask) => order.price <= maker_price,
            };
            if !marketable {
                break;
            }
            if self.self_trade == SelfTradePolicy::CancelTaker && self.resting[i].agent_id == order.agent_id {
                blocked = true;
                break;
            }
            let maker = &mut self.resting[i];
            let qty = remaining.min(maker.quantity);
            fills.push(Fill {
                taker_order_id: order.order_id,
                maker_order_id: maker.order_id,
                taker_agent_id: order.agent_id,
                maker_agent_id: maker.agent_id,
                taker_side: order.side,
                price: maker.price,
                quantity: qty,
                at: order.placed_at,
            });
            maker.quantity -= qty;
            remaining -= qty;
            if maker.quantity == 0 {
                self.resting.remove(i);
            }
        }
        let mut outcome = SubmitOutcome { fills, resting: None, unfilled: 0 };
        if remaining == 0 {
            return Ok(outcome);
        }
        if order.kind == OrderKind::Market || blocked {
            outcome.unfilled = remaining;
        } else {
            let rest = Order { quantity: remaining, ..order };
            self.resting.push(rest.clone());
            outcome.resting = Some(rest);
        }
        Ok(outcome)
    }

    pub fn cancel(&mut self, order_id: OrderId) -> Result<Order, BookError> {
        let i = self
            .resting
            .iter()
            .position(|o| o.order_id == order_id)
            .ok_or(BookError::UnknownOrder(order_id))?;
        Ok(self.resting.remove(i))
    }

    pub fn reduce(&mut self, order_id: OrderId, by: Quantity) -> Result<Quantity, BookError> {
        if by == 0 {
            return Err(BookError::InvalidQuantity(order_id));
        }
        let i = self
            .resting
            .iter()
            .position(|o| o.order_id == order_id)
            .ok_or(BookError::UnknownOrder(order_id))?;
        let o = &mut self.resting[i];
        o.quantity -= by.min(o.quantity);
        let left = o.quantity;
        if left == 0 {
            self.resting.remove(i);
        }
        Ok(left)
    }

    /// Resting orders of one side in priority order.
    pub fn resting_orders(&self, side: Side) -> Vec<Order> {
        let mut out: Vec<(usize, Order)> = self
            .resting
            .iter()
            .enumerate()
            .filter(|(_, o)| o.side == side)
            .map(|(i, o)| (i, o.clone()))
            .collect();
        out.sort_by(|(ia, a), (ib, b)| {
            let by_price = match side {
                Side::Bid => b.price.cmp(&a.price),
                Side::Ask => a.price.cmp(&b.price),
            };
            by_price.then(ia.cmp(ib))
        });
        out.into_iter().map(|(_, o)| o).collect()
    }
}

/// One step of a randomized book workload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BookOp {
    Submit(Order),
    Cancel(OrderId),
    Reduce(OrderId, Quantity),
}

/// `len` mixed limit/market/cancel/reduce operations on a narrow price band so
/// that crossing, queueing and partial fills are frequent. Cancels and
/// reductions mostly target ids that were submitted earlier, sometimes unknown
/// ones.
pub fn random_ops<R: rand::Rng>(rng: &mut R, len: usize) -> Vec<BookOp> {
    use super::Price;
    use crate::time::SimTime;
    let mut ops = Vec::with_capacity(len);
    let mut next_id: OrderId = 1;
    for step in 0..len {
        let roll: f64 = rng.random();
        let known = next_id > 1;
        let op = if roll < 0.55 || !known {
            let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
            let price: Price = 10_000 + rng.random_range(-10..=10);
            let qty: Quantity = rng.random_range(1..=300);
            let agent = rng.random_range(0..4);
            let o = Order::limit(next_id, agent, side, price, qty, SimTime(step as u64));
            next_id += 1;
            BookOp::Submit(o)
        } else if roll < 0.70 {
            let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
            let o = Order::market(next_id, rng.random_range(0..4), side, rng.random_range(1..=500), SimTime(step as u64));
            next_id += 1;
            BookOp::Submit(o)
        } else if roll < 0.87 {
            BookOp::Cancel(rng.random_range(1..next_id + 3))
        } else {
            BookOp::Reduce(rng.random_range(1..next_id + 3), rng.random_range(0..=200))
        };
        ops.push(op);
    }
    ops
}

/// Apply `ops` to both books and report the first divergence in results,
/// fills, top of book or final resting state. Also checks that the fast book
/// stays uncrossed and conserves quantity after every operation.
pub fn check_against_reference(ops: &[BookOp], policy: SelfTradePolicy) -> Result<(), String> {
    use super::OrderBook;
    let mut fast = OrderBook::with_self_trade_policy(policy);
    let mut slow = ReferenceBook::with_self_trade_policy(policy);
    // submitted = 2 * traded (taker and maker side) + resting + removed
    let (mut submitted, mut traded, mut removed) = (0u64, 0u64, 0u64);
    for (step, op) in ops.iter().enumerate() {
        match op {
            BookOp::Submit(o) => {
                let a = fast.submit(o.clone());
                let b = slow.submit(o.clone());
                if a != b {
                    return Err(format!("step {step}: submit {o:?}: book {a:?} vs reference {b:?}"));
                }
                if let Ok(out) = a {
                    submitted += o.quantity;
                    traded += out.filled_quantity();
                    removed += out.unfilled;
                }
            }
            BookOp::Cancel(id) => {
                let a = fast.cancel(*id);
                let b = slow.cancel(*id);
                if a != b {
                    return Err(format!("step {step}: cancel {id}: book {a:?} vs reference {b:?}"));
                }
                if let Ok(o) = a {
                    removed += o.quantity;
                }
            }
            BookOp::Reduce(id, by) => {
                let before = fast.order(*id).map(|o| o.quantity);
                let a = fast.reduce(*id, *by);
                let b = slow.reduce(*id, *by);
                if a != b {
                    return Err(format!("step {step}: reduce {id} by {by}: book {a:?} vs reference {b:?}"));
                }
                if let (Ok(left), Some(q)) = (a, before) {
                    removed += q - left;
                }
            }
        }
        if let (Some(b), Some(a)) = (fast.best_bid(), fast.best_ask()) {
            if b.price >= a.price {
                return Err(format!("step {step}: crossed book {} >= {}", b.price, a.price));
            }
        }
        let resting = fast.total_quantity(Side::Bid) + fast.total_quantity(Side::Ask);
        if submitted != 2 * traded + resting + removed {
            return Err(format!(
                "step {step}: conservation broken: submitted {submitted}, traded {traded}, resting {resting}, removed {removed}"
            ));
        }
    }
    for side in [Side::Bid, Side::Ask] {
        if fast.resting_orders(side) != slow.resting_orders(side) {
            return Err(format!("final {side:?} side differs from the reference"));
        }
    }
    Ok(())
}
