use crate::lob::{BookSnapshot, Quantity};
use serde::{Deserialize, Serialize};

pub const FEATURE_COUNT: usize = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    /// `2(T - t)/T - 1`, in [-1, 1].
    pub time_remaining: f64,
    /// `2(N - filled)/N - 1`, in [-1, 1].
    pub quantity_remaining: f64,
    /// Best ask minus best bid, in ticks.
    pub spread: f64,
    /// `(Q_ask - Q_bid)/(Q_ask + Q_bid)` at the best levels.
    pub volume_imbalance: f64,
    /// Log return of the mid-price over the last period.
    pub return_1: f64,
    /// Log return of the mid-price since the episode start.
    pub return_t: f64,
}

impl StateVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.time_remaining,
            self.quantity_remaining,
            self.spread,
            self.volume_imbalance,
            self.return_1,
            self.return_t,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        StateVector {
            time_remaining: a[0],
            quantity_remaining: a[1],
            spread: a[2],
            volume_imbalance: a[3],
            return_1: a[4],
            return_t: a[5],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrivateState {
    /// Periods elapsed since the episode start.
    pub elapsed_periods: usize,
    pub total_periods: usize,
    pub filled: Quantity,
    pub parent_quantity: Quantity,
}

/// Mid-prices the return features are measured against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceHistory {
    /// Price at the episode start.
    pub initial: Option<f64>,
    /// Price observed at the previous period boundary.
    pub previous: Option<f64>,
}

impl PriceHistory {
    /// Record the price used for the current period.
    pub fn observe(&mut self, price: Option<f64>) {
        if let Some(p) = price {
            self.initial.get_or_insert(p);
            self.previous = Some(p);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Featurized {
    pub state: StateVector,
    /// Price entering the returns: the mid, or the last known mid when one
    /// side of the book is empty.
    pub price: Option<f64>,
    /// One side of the book was empty.
    pub degenerate: bool,
}

pub fn featurize(private: &PrivateState, book: &BookSnapshot, prices: &PriceHistory) -> Featurized {
    let total = private.total_periods.max(1) as f64;
    let elapsed = private.elapsed_periods.min(private.total_periods) as f64;
    let parent = private.parent_quantity.max(1) as f64;
    let filled = private.filled.min(private.parent_quantity) as f64;

    let time_remaining = 2.0 * (total - elapsed) / total - 1.0;
    let quantity_remaining = 2.0 * (parent - filled) / parent - 1.0;

    let (spread, volume_imbalance, mid, degenerate) = match (book.best_bid(), book.best_ask()) {
        (Some(b), Some(a)) => {
            let (qa, qb) = (a.quantity as f64, b.quantity as f64);
            let imb = if qa + qb > 0.0 { (qa - qb) / (qa + qb) } else { 0.0 };
            ((a.price - b.price) as f64, imb, Some((a.price + b.price) as f64 / 2.0), false)
        }
        _ => (0.0, 0.0, None, true),
    };
    if degenerate {
        log::debug!("one-sided book at period {}: spread and imbalance set to 0", private.elapsed_periods);
    }
    let price = mid.or(prices.previous);
    let log_return = |base: Option<f64>| match (price, base) {
        (Some(p), Some(b)) if p > 0.0 && b > 0.0 => (p / b).ln(),
        _ => 0.0,
    };
    Featurized {
        state: StateVector {
            time_remaining,
            quantity_remaining,
            spread,
            volume_imbalance,
            return_1: log_return(prices.previous),
            return_t: log_return(prices.initial),
        },
        price,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::Level;

    fn book(bid: Option<(i64, u64)>, ask: Option<(i64, u64)>) -> BookSnapshot {
        let lv = |(price, quantity)| Level { price, quantity, order_count: 1 };
        BookSnapshot { bids: bid.map(lv).into_iter().collect(), asks: ask.map(lv).into_iter().collect(), last_trade_price: None }
    }

    #[test]
    fn episode_start() {
        let p = PrivateState { elapsed_periods: 0, total_periods: 660, filled: 0, parent_quantity: 6600 };
        let f = featurize(&p, &book(Some((100, 10)), Some((102, 10))), &PriceHistory::default());
        assert_eq!(f.state.time_remaining, 1.0);
        assert_eq!(f.state.quantity_remaining, 1.0);
        assert_eq!((f.state.return_1, f.state.return_t), (0.0, 0.0));
        assert_eq!(f.price, Some(101.0));
    }

    #[test]
    fn midpoint_is_zero() {
        let p = PrivateState { elapsed_periods: 330, total_periods: 660, filled: 3300, parent_quantity: 6600 };
        let f = featurize(&p, &book(Some((100, 10)), Some((102, 10))), &PriceHistory::default());
        assert_eq!((f.state.time_remaining, f.state.quantity_remaining), (0.0, 0.0));
    }

    #[test]
    fn imbalance_and_flat_returns() {
        let p = PrivateState { elapsed_periods: 3, total_periods: 10, filled: 0, parent_quantity: 10 };
        let prices = PriceHistory { initial: Some(101.0), previous: Some(101.0) };
        let f = featurize(&p, &book(Some((100, 100)), Some((102, 300))), &prices);
        assert_eq!(f.state.volume_imbalance, 0.5);
        assert_eq!(f.state.spread, 2.0);
        assert_eq!((f.state.return_1, f.state.return_t), (0.0, 0.0));
    }

    #[test]
    fn one_sided_book_uses_last_mid() {
        let p = PrivateState { elapsed_periods: 3, total_periods: 10, filled: 0, parent_quantity: 10 };
        let prices = PriceHistory { initial: Some(100.0), previous: Some(110.0) };
        let f = featurize(&p, &book(Some((100, 100)), None), &prices);
        assert!(f.degenerate);
        assert_eq!((f.state.spread, f.state.volume_imbalance), (0.0, 0.0));
        assert_eq!(f.state.return_1, 0.0);
        assert!((f.state.return_t - (1.1f64).ln()).abs() < 1e-15);
        assert!(f.state.to_array().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn history_keeps_first_price() {
        let mut h = PriceHistory::default();
        h.observe(None);
        h.observe(Some(5.0));
        h.observe(Some(6.0));
        assert_eq!(h, PriceHistory { initial: Some(5.0), previous: Some(6.0) });
    }
}
