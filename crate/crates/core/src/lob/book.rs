use super::{BookError, BookSnapshot, Fill, Level, Order, OrderId, OrderKind, Price, Quantity, Side, SubmitOutcome};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io::{self, Write};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfTradePolicy {
    /// An agent may trade against its own resting orders.
    #[default]
    Allow,
    /// Matching stops at the first resting order of the same agent and the
    /// taker remainder is cancelled.
    CancelTaker,
}

#[derive(Clone, Debug)]
struct PriceLevel {
    queue: VecDeque<Order>,
    total_quantity: Quantity,
}

impl PriceLevel {
    fn new() -> Self {
        PriceLevel { queue: VecDeque::new(), total_quantity: 0 }
    }

    fn position(&self, order_id: OrderId) -> Option<usize> {
        self.queue.iter().position(|o| o.order_id == order_id)
    }
}

#[derive(Clone, Debug, Default)]
pub struct OrderBook {
    bids: BTreeMap<Price, PriceLevel>,
    asks: BTreeMap<Price, PriceLevel>,
    index: HashMap<OrderId, (Side, Price)>,
    seen: HashSet<OrderId>,
    last_trade_price: Option<Price>,
    self_trade: SelfTradePolicy,
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_self_trade_policy(policy: SelfTradePolicy) -> Self {
        OrderBook { self_trade: policy, ..Self::default() }
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, PriceLevel> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    fn best_price(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.bids.keys().next_back().copied(),
            Side::Ask => self.asks.keys().next().copied(),
        }
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.iter().next_back().map(|(p, l)| level_view(*p, l))
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.iter().next().map(|(p, l)| level_view(*p, l))
    }

    pub fn last_trade_price(&self) -> Option<Price> {
        self.last_trade_price
    }

    /// Number of resting orders.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, order_id: OrderId) -> bool {
        self.index.contains_key(&order_id)
    }

    pub fn order(&self, order_id: OrderId) -> Option<&Order> {
        let (side, price) = self.index.get(&order_id)?;
        let level = match side {
            Side::Bid => self.bids.get(price),
            Side::Ask => self.asks.get(price),
        }?;
        level.queue.iter().find(|o| o.order_id == order_id)
    }

    /// All levels of one side, best first.
    pub fn levels(&self, side: Side) -> Vec<Level> {
        match side {
            Side::Bid => self.bids.iter().rev().map(|(p, l)| level_view(*p, l)).collect(),
            Side::Ask => self.asks.iter().map(|(p, l)| level_view(*p, l)).collect(),
        }
    }

    /// Resting orders of one side in priority order.
    pub fn resting_orders(&self, side: Side) -> Vec<Order> {
        let levels: Box<dyn Iterator<Item = &PriceLevel>> = match side {
            Side::Bid => Box::new(self.bids.values().rev()),
            Side::Ask => Box::new(self.asks.values()),
        };
        levels.flat_map(|l| l.queue.iter().cloned()).collect()
    }

    /// Highest-priority resting order on `side`.
    pub fn resting_front(&self, side: Side) -> Option<Order> {
        let level = match side {
            Side::Bid => self.bids.values().next_back(),
            Side::Ask => self.asks.values().next(),
        }?;
        level.queue.front().cloned()
    }

    pub fn total_quantity(&self, side: Side) -> Quantity {
        match side {
            Side::Bid => self.bids.values().map(|l| l.total_quantity).sum(),
            Side::Ask => self.asks.values().map(|l| l.total_quantity).sum(),
        }
    }

    /// Match `order` against the opposite side, then rest any limit remainder.
    pub fn submit(&mut self, order: Order) -> Result<SubmitOutcome, BookError> {
        order.validate()?;
        if !self.seen.insert(order.order_id) {
            return Err(BookError::DuplicateOrderId(order.order_id));
        }

        let mut remaining = order.quantity;
        let mut fills = Vec::new();
        let mut blocked = false;
        let opposite = order.side.opposite();

        while remaining > 0 {
            let Some(best) = self.best_price(opposite) else { break };
            if !order.crosses(best) {
                break;
            }
            let policy = self.self_trade;
            let book_side = self.side_mut(opposite);
            let level = book_side.get_mut(&best).expect("best level exists");
            let maker = level.queue.front_mut().expect("levels are never empty");
            if policy == SelfTradePolicy::CancelTaker && maker.agent_id == order.agent_id {
                blocked = true;
                break;
            }
            let qty = remaining.min(maker.quantity);
            fills.push(Fill {
                taker_order_id: order.order_id,
                maker_order_id: maker.order_id,
                taker_agent_id: order.agent_id,
                maker_agent_id: maker.agent_id,
                taker_side: order.side,
                price: best,
                quantity: qty,
                at: order.placed_at,
            });
            maker.quantity -= qty;
            level.total_quantity -= qty;
            remaining -= qty;
            if maker.quantity == 0 {
                let done = level.queue.pop_front().expect("front exists");
                if level.queue.is_empty() {
                    book_side.remove(&best);
                }
                self.index.remove(&done.order_id);
            }
            self.last_trade_price = Some(best);
        }

        let mut outcome = SubmitOutcome { fills, resting: None, unfilled: 0 };
        if remaining == 0 {
            return Ok(outcome);
        }
        if order.kind == OrderKind::Market || blocked {
            outcome.unfilled = remaining;
            return Ok(outcome);
        }
        let rest = Order { quantity: remaining, ..order };
        self.index.insert(rest.order_id, (rest.side, rest.price));
        let level = self.side_mut(rest.side).entry(rest.price).or_insert_with(PriceLevel::new);
        level.total_quantity += rest.quantity;
        level.queue.push_back(rest.clone());
        outcome.resting = Some(rest);
        Ok(outcome)
    }

    /// Remove a resting order. The returned order carries the cancelled
    /// (remaining) quantity.
    pub fn cancel(&mut self, order_id: OrderId) -> Result<Order, BookError> {
        let (side, price) = self.index.remove(&order_id).ok_or(BookError::UnknownOrder(order_id))?;
        let book_side = self.side_mut(side);
        let level = book_side.get_mut(&price).expect("indexed level exists");
        let pos = level.position(order_id).expect("indexed order exists");
        let order = level.queue.remove(pos).expect("position is valid");
        level.total_quantity -= order.quantity;
        if level.queue.is_empty() {
            book_side.remove(&price);
        }
        Ok(order)
    }

    /// Reduce a resting order in place, keeping its queue position. Returns the
    /// remaining quantity; an order reduced to zero is removed.
    pub fn reduce(&mut self, order_id: OrderId, by: Quantity) -> Result<Quantity, BookError> {
        if by == 0 {
            return Err(BookError::InvalidQuantity(order_id));
        }
        let &(side, price) = self.index.get(&order_id).ok_or(BookError::UnknownOrder(order_id))?;
        let level = self.side_mut(side).get_mut(&price).expect("indexed level exists");
        let pos = level.position(order_id).expect("indexed order exists");
        let order = &mut level.queue[pos];
        let cut = by.min(order.quantity);
        order.quantity -= cut;
        level.total_quantity -= cut;
        let remaining = order.quantity;
        if remaining == 0 {
            self.cancel(order_id)?;
        }
        Ok(remaining)
    }

    /// Top-`k` levels per side.
    pub fn snapshot(&self, k: usize) -> BookSnapshot {
        BookSnapshot {
            bids: self.bids.iter().rev().take(k).map(|(p, l)| level_view(*p, l)).collect(),
            asks: self.asks.iter().take(k).map(|(p, l)| level_view(*p, l)).collect(),
            last_trade_price: self.last_trade_price,
        }
    }

    /// Per-level CSV dump: `side,price_ticks,total_quantity,order_count`, bids
    /// best-first followed by asks best-first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "side,price_ticks,total_quantity,order_count")?;
        for side in [Side::Bid, Side::Ask] {
            for level in self.levels(side) {
                writeln!(out, "{},{},{},{}", side.as_str(), level.price, level.quantity, level.order_count)?;
            }
        }
        Ok(())
    }
}

fn level_view(price: Price, level: &PriceLevel) -> Level {
    Level { price, quantity: level.total_quantity, order_count: level.queue.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::reference::ReferenceBook;
    use crate::time::SimTime;

    const T: SimTime = SimTime(0);

    fn dollars(d: f64) -> Price {
        (d * 10_000.0).round() as Price
    }

    fn seeded_asks() -> OrderBook {
        let mut book = OrderBook::new();
        book.submit(Order::limit(1, 1, Side::Ask, dollars(100.00), 200, T)).unwrap();
        book.submit(Order::limit(2, 2, Side::Ask, dollars(100.01), 300, T)).unwrap();
        book
    }

    #[test]
    fn market_buy_walks_two_levels() {
        let mut book = seeded_asks();
        let out = book.submit(Order::market(3, 9, Side::Bid, 250, T)).unwrap();
        let got: Vec<(Price, Quantity)> = out.fills.iter().map(|f| (f.price, f.quantity)).collect();
        assert_eq!(got, vec![(dollars(100.00), 200), (dollars(100.01), 50)]);
        assert_eq!(book.levels(Side::Ask), vec![Level { price: dollars(100.01), quantity: 250, order_count: 1 }]);
        assert_eq!(book.snapshot(3).best_ask().map(|l| (l.price, l.quantity)), Some((dollars(100.01), 250)));

        // Same sequence through the reference matcher.
        let mut reference = ReferenceBook::new();
        reference.submit(Order::limit(1, 1, Side::Ask, dollars(100.00), 200, T)).unwrap();
        reference.submit(Order::limit(2, 2, Side::Ask, dollars(100.01), 300, T)).unwrap();
        let ref_out = reference.submit(Order::market(3, 9, Side::Bid, 250, T)).unwrap();
        assert_eq!(ref_out.fills, out.fills);
        assert_eq!(reference.resting_orders(Side::Ask), book.resting_orders(Side::Ask));
    }

    #[test]
    fn non_marketable_limit_rests() {
        let mut book = seeded_asks();
        let out = book.submit(Order::limit(3, 9, Side::Bid, dollars(99.50), 100, T)).unwrap();
        assert!(out.fills.is_empty());
        assert_eq!(out.resting.as_ref().map(|o| o.price), Some(dollars(99.50)));
        assert_eq!(book.best_bid().unwrap().price, dollars(99.50));
    }

    #[test]
    fn market_sell_into_empty_bids_is_unfilled() {
        let mut book = OrderBook::new();
        let out = book.submit(Order::market(1, 1, Side::Ask, 10, T)).unwrap();
        assert!(out.fills.is_empty());
        assert_eq!(out.unfilled, 10);
        assert!(book.is_empty());
    }

    #[test]
    fn duplicate_and_invalid_orders_rejected() {
        let mut book = seeded_asks();
        assert_eq!(
            book.submit(Order::limit(1, 1, Side::Bid, 5, 1, T)),
            Err(BookError::DuplicateOrderId(1))
        );
        assert_eq!(book.submit(Order::limit(7, 1, Side::Bid, 5, 0, T)), Err(BookError::InvalidQuantity(7)));
        assert_eq!(book.submit(Order::limit(8, 1, Side::Bid, 0, 5, T)), Err(BookError::InvalidPrice(8, 0)));
    }

    #[test]
    fn cancel_fresh_partial_and_twice() {
        let mut book = OrderBook::new();
        book.submit(Order::limit(1, 1, Side::Bid, 100, 500, T)).unwrap();
        assert_eq!(book.cancel(1).unwrap().quantity, 500);
        assert!(book.best_bid().is_none());
        assert_eq!(book.cancel(1), Err(BookError::UnknownOrder(1)));

        book.submit(Order::limit(2, 1, Side::Bid, 100, 500, T)).unwrap();
        book.submit(Order::market(3, 2, Side::Ask, 200, T)).unwrap();
        assert_eq!(book.cancel(2).unwrap().quantity, 300);
    }

    #[test]
    fn reduce_keeps_queue_position() {
        let mut book = OrderBook::new();
        book.submit(Order::limit(1, 1, Side::Ask, 100, 500, T)).unwrap();
        book.submit(Order::limit(2, 2, Side::Ask, 100, 500, T)).unwrap();
        assert_eq!(book.reduce(1, 100).unwrap(), 400);
        let out = book.submit(Order::market(3, 3, Side::Bid, 10, T)).unwrap();
        assert_eq!(out.fills[0].maker_order_id, 1);
        assert_eq!(book.best_ask().unwrap().quantity, 890);

        assert_eq!(book.reduce(1, 10_000).unwrap(), 0);
        assert!(!book.contains(1));
        assert_eq!(book.reduce(1, 1), Err(BookError::UnknownOrder(1)));
        assert_eq!(book.reduce(2, 0), Err(BookError::InvalidQuantity(2)));
    }

    #[test]
    fn snapshot_reads_spread_and_mid() {
        let mut book = OrderBook::new();
        let empty = book.snapshot(3);
        assert!(empty.best_bid().is_none() && empty.best_ask().is_none() && empty.mid_price().is_none());

        book.submit(Order::limit(1, 1, Side::Bid, dollars(100.00), 10, T)).unwrap();
        book.submit(Order::limit(2, 1, Side::Ask, dollars(100.02), 5, T)).unwrap();
        let snap = book.snapshot(3);
        assert_eq!(snap.spread(), Some(dollars(0.02)));
        assert_eq!(snap.mid_price(), Some(dollars(100.01) as f64));
        assert_eq!((snap.best_ask().unwrap().quantity, snap.best_bid().unwrap().quantity), (5, 10));
        assert_eq!(book.len(), 2);
    }

    #[test]
    fn self_trade_prevention_cancels_taker_remainder() {
        let mut book = OrderBook::with_self_trade_policy(SelfTradePolicy::CancelTaker);
        book.submit(Order::limit(1, 2, Side::Ask, 100, 5, T)).unwrap();
        book.submit(Order::limit(2, 1, Side::Ask, 101, 5, T)).unwrap();
        let out = book.submit(Order::limit(3, 1, Side::Bid, 101, 8, T)).unwrap();
        assert_eq!(out.filled_quantity(), 5);
        assert_eq!(out.unfilled, 3);
        assert!(out.resting.is_none());
        assert_eq!(book.best_ask().unwrap().price, 101);
    }

    #[test]
    fn csv_dump_lists_levels() {
        let mut book = seeded_asks();
        book.submit(Order::limit(5, 1, Side::Bid, dollars(99.99), 10, T)).unwrap();
        let mut buf = Vec::new();
        book.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "side,price_ticks,total_quantity,order_count\nbid,999900,10,1\nask,1000000,200,1\nask,1000100,300,1\n"
        );
    }
}
