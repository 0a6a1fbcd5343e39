use crate::lob::{Price, Quantity};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Scale of the quantity component.
    pub lambda: f64,
    pub parent_quantity: Quantity,
    /// Mid-price when the parent order started executing.
    pub arrival_price: f64,
}

/// Quantity-weighted average price of `(price, quantity)` fills.
pub fn vwap(fills: &[(Price, Quantity)]) -> Option<f64> {
    let qty: Quantity = fills.iter().map(|f| f.1).sum();
    if qty == 0 {
        return None;
    }
    let notional: f64 = fills.iter().map(|&(p, q)| p as f64 * q as f64).sum();
    Some(notional / qty as f64)
}

/// `(1 - |P_fill - P_arrival| / P_arrival) * lambda * N_t / N` over one
/// period's fills; zero when nothing filled.
pub fn compute_reward(fills: &[(Price, Quantity)], params: &RewardParams) -> f64 {
    let Some(fill_price) = vwap(fills) else { return 0.0 };
    let filled: Quantity = fills.iter().map(|f| f.1).sum();
    let slippage = (fill_price - params.arrival_price).abs() / params.arrival_price;
    (1.0 - slippage) * params.lambda * filled as f64 / params.parent_quantity as f64
}
