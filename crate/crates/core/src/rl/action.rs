use crate::lob::{BookSnapshot, OrderKind, Price, Quantity, Side};
use serde::{Deserialize, Serialize};

pub const PLACEMENTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Market,
    /// 100% at the top level of the agent's own side.
    TopLevel,
    /// 50% on each of the top two levels.
    SplitTwo,
    /// 33%/33%/34% on the top three levels.
    SplitThree,
}

impl Placement {
    pub fn index(self) -> usize {
        match self {
            Placement::Market => 0,
            Placement::TopLevel => 1,
            Placement::SplitTwo => 2,
            Placement::SplitThree => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Some(match i {
            0 => Placement::Market,
            1 => Placement::TopLevel,
            2 => Placement::SplitTwo,
            3 => Placement::SplitThree,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub index: usize,
    pub multiplier: f64,
    pub placement: Placement,
}

/// Execution multipliers of the TWAP child quantity crossed with the four
/// placements; `index = 4 * multiplier_rank + placement`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    multipliers: Vec<f64>,
}

impl Default for ActionSpace {
    fn default() -> Self {
        ActionSpace { multipliers: vec![0.1, 0.5, 1.0, 1.5, 2.0, 2.5] }
    }
}

impl ActionSpace {
    pub fn new(multipliers: Vec<f64>) -> Result<Self, String> {
        if multipliers.is_empty() || multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(format!("invalid multiplier set {multipliers:?}"));
        }
        Ok(ActionSpace { multipliers })
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn len(&self) -> usize {
        self.multipliers.len() * PLACEMENTS
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    pub fn encode(&self, multiplier_rank: usize, placement: Placement) -> usize {
        assert!(multiplier_rank < self.multipliers.len());
        PLACEMENTS * multiplier_rank + placement.index()
    }

    pub fn decode(&self, index: usize) -> Option<Action> {
        let multiplier = *self.multipliers.get(index / PLACEMENTS)?;
        let placement = Placement::from_index(index % PLACEMENTS)?;
        Some(Action { index, multiplier, placement })
    }

    /// The action that reproduces TWAP: multiplier 1.0 as a market order.
    pub fn twap_action(&self) -> Option<Action> {
        let rank = self.multipliers.iter().position(|&m| m == 1.0)?;
        self.decode(self.encode(rank, Placement::Market))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildOrder {
    pub kind: OrderKind,
    pub side: Side,
    /// Absent for market orders.
    pub price: Option<Price>,
    pub quantity: Quantity,
}

/// `floor(x + 0.5)`, tolerant of representation error just below a half.
pub fn round_half_up(x: f64) -> Quantity {
    (x + 0.5 + 1e-9).floor().max(0.0) as Quantity
}

/// Split one period's quantity into child orders.
///
/// The period quantity is `min(round(a * n_twap), remaining)`. Limit children
/// are priced at the agent's own-side levels; missing levels are extrapolated
/// `price_step` ticks further from the touch, and a book with no usable
/// reference price falls back to a single market order. Zero-quantity children
/// are omitted.
pub fn schedule_orders(
    action: &Action,
    remaining: Quantity,
    n_twap: Quantity,
    snapshot: &BookSnapshot,
    side: Side,
    price_step: Price,
) -> Vec<ChildOrder> {
    let total = round_half_up(action.multiplier * n_twap as f64).min(remaining);
    if total == 0 {
        return Vec::new();
    }
    let market = || vec![ChildOrder { kind: OrderKind::Market, side, price: None, quantity: total }];
    let shares: &[f64] = match action.placement {
        Placement::Market => return market(),
        Placement::TopLevel => &[1.0],
        Placement::SplitTwo => &[0.5, 0.5],
        Placement::SplitThree => &[0.33, 0.33, 0.34],
    };

    // Own-side level prices, best first; a step away from the opposite touch
    // when the own side is empty.
    let away = match side {
        Side::Bid => -price_step,
        Side::Ask => price_step,
    };
    let mut prices: Vec<Price> = snapshot.side(side).iter().map(|l| l.price).collect();
    if prices.is_empty() {
        match snapshot.best(side.opposite()) {
            Some(l) => prices.push(l.price + away),
            None => return market(),
        }
    }
    while prices.len() < shares.len() {
        let last = *prices.last().expect("non-empty");
        prices.push(last + away);
    }

    let mut quantities: Vec<Quantity> = shares[..shares.len() - 1]
        .iter()
        .map(|s| round_half_up(total as f64 * s))
        .collect();
    let assigned: Quantity = quantities.iter().sum();
    quantities.push(total - assigned.min(total));

    quantities
        .into_iter()
        .zip(prices)
        .filter(|(q, p)| *q > 0 && *p > 0)
        .map(|(quantity, price)| ChildOrder { kind: OrderKind::Limit, side, price: Some(price), quantity })
        .collect()
}
