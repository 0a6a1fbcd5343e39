//! Seeded synthetic LOBSTER order flow.
//!
//! Events on each side arrive as a Poisson process; the merged stream is
//! generated as one process at twice the per-side rate with a fair coin for the
//! side. Every event is one of:
//!
//! - a delete (type 3) or partial cancel (type 2) of a uniformly chosen resting
//!   order, with probability `cancel_probability`;
//! - a visible execution (type 4) of the front order at the best level, with
//!   probability `execution_probability`;
//! - otherwise a new limit order (type 1) of gamma-distributed size placed a
//!   geometric number of grid steps behind the opposite best price.
//!
//! The generator tracks its own book so that every cancel and execution refers
//! to an order that is actually resting, and new limit orders never cross.

use super::{Direction, EventType, LobsterEvent};
use crate::lob::{Order, OrderBook, OrderId, Price, Quantity, Side};
use crate::rng::SimRng;
use crate::time::{SimTime, NANOS_PER_SECOND};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, Gamma, Geometric};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFlowConfig {
    /// Events per second on each side.
    pub arrival_rate_per_side: f64,
    pub size_shape: f64,
    pub size_scale: f64,
    /// Success probability of the geometric placement offset (in grid steps).
    pub placement_p: f64,
    pub cancel_probability: f64,
    pub execution_probability: f64,
    pub initial_mid_ticks: Price,
    /// Price grid in ticks (100 = one cent).
    pub grid_ticks: Price,
    /// Levels per side seeded at the session start.
    pub initial_levels: u32,
    pub initial_level_size: Quantity,
    pub session_start: SimTime,
    pub session_end: SimTime,
    pub seed: u64,
}

impl Default for SyntheticFlowConfig {
    fn default() -> Self {
        SyntheticFlowConfig {
            arrival_rate_per_side: 2.0,
            size_shape: 2.0,
            size_scale: 50.0,
            placement_p: 0.5,
            cancel_probability: 0.2,
            execution_probability: 0.1,
            initial_mid_ticks: 1_000_050,
            grid_ticks: 100,
            initial_levels: 10,
            initial_level_size: 500,
            session_start: SimTime::from_hms(9, 30, 0),
            session_end: SimTime::from_hms(16, 0, 0),
            seed: 1,
        }
    }
}

impl SyntheticFlowConfig {
    pub fn validate(&self) -> Result<(), String> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must be within [0, 1], got {v}"))
            }
        };
        if !(self.arrival_rate_per_side > 0.0 && self.arrival_rate_per_side.is_finite()) {
            return Err(format!("arrival_rate_per_side must be positive, got {}", self.arrival_rate_per_side));
        }
        if !(self.size_shape > 0.0 && self.size_scale > 0.0) {
            return Err("size_shape and size_scale must be positive".into());
        }
        if !(self.placement_p > 0.0 && self.placement_p <= 1.0) {
            return Err(format!("placement_p must be within (0, 1], got {}", self.placement_p));
        }
        prob("cancel_probability", self.cancel_probability)?;
        prob("execution_probability", self.execution_probability)?;
        if self.cancel_probability + self.execution_probability > 1.0 {
            return Err("cancel_probability + execution_probability exceeds 1".into());
        }
        if self.grid_ticks <= 0 {
            return Err("grid_ticks must be positive".into());
        }
        if self.initial_mid_ticks <= self.grid_ticks * (self.initial_levels as Price + 1) {
            return Err("initial_mid_ticks too small for the seeded levels".into());
        }
        if self.session_start >= self.session_end {
            return Err("session_start must precede session_end".into());
        }
        Ok(())
    }

    /// Expected number of flow events (excluding the seeded levels).
    pub fn expected_event_count(&self) -> f64 {
        2.0 * self.arrival_rate_per_side * (self.session_end - self.session_start).as_secs_f64()
    }
}

pub struct SyntheticFlow {
    config: SyntheticFlowConfig,
    rng: SimRng,
    interarrival: Exp<f64>,
    sizes: Gamma<f64>,
    offsets: Geometric,
    book: OrderBook,
    live: [Vec<OrderId>; 2],
    seeded: Vec<LobsterEvent>,
    now: SimTime,
    next_id: OrderId,
    last_best: [Price; 2],
}

pub fn generate_synthetic(config: SyntheticFlowConfig) -> Result<SyntheticFlow, String> {
    config.validate()?;
    let interarrival = Exp::new(2.0 * config.arrival_rate_per_side).map_err(|e| e.to_string())?;
    let sizes = Gamma::new(config.size_shape, config.size_scale).map_err(|e| e.to_string())?;
    let offsets = Geometric::new(config.placement_p).map_err(|e| e.to_string())?;
    let half = config.grid_ticks / 2;
    // Seeded levels sit on the grid, one step either side of the mid.
    let best_bid = (config.initial_mid_ticks - half) / config.grid_ticks * config.grid_ticks;
    let best_ask = best_bid + config.grid_ticks;
    let mut flow = SyntheticFlow {
        rng: SimRng::seed_from_u64(config.seed),
        interarrival,
        sizes,
        offsets,
        book: OrderBook::new(),
        live: [Vec::new(), Vec::new()],
        seeded: Vec::new(),
        now: config.session_start,
        next_id: 1,
        last_best: [best_bid, best_ask],
        config,
    };
    for level in 0..flow.config.initial_levels as Price {
        for side in [Side::Bid, Side::Ask] {
            let price = match side {
                Side::Bid => best_bid - level * flow.config.grid_ticks,
                Side::Ask => best_ask + level * flow.config.grid_ticks,
            };
            let e = flow.new_limit(side, price, flow.config.initial_level_size);
            flow.seeded.push(e);
        }
    }
    flow.seeded.reverse();
    Ok(flow)
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Bid => 0,
        Side::Ask => 1,
    }
}

impl SyntheticFlow {
    pub fn config(&self) -> &SyntheticFlowConfig {
        &self.config
    }

    fn new_limit(&mut self, side: Side, price: Price, size: Quantity) -> LobsterEvent {
        let id = self.next_id;
        self.next_id += 1;
        self.book
            .submit(Order::limit(id, 0, side, price, size, self.now))
            .expect("generated limit orders are valid and unique");
        self.live[side_index(side)].push(id);
        LobsterEvent {
            time: self.now,
            event_type: EventType::NewLimit,
            order_id: id,
            size,
            price,
            direction: Direction::from_side(side),
        }
    }

    fn best(&mut self, side: Side) -> Price {
        let level = match side {
            Side::Bid => self.book.best_bid(),
            Side::Ask => self.book.best_ask(),
        };
        if let Some(l) = level {
            self.last_best[side_index(side)] = l.price;
        }
        self.last_best[side_index(side)]
    }

    fn sample_size(&mut self) -> Quantity {
        let s = self.sizes.sample(&mut self.rng).ceil();
        (s as Quantity).max(1)
    }

    /// Uniformly chosen live order on `side`, purging ids that have left the book.
    fn random_resting(&mut self, side: Side) -> Option<Order> {
        let live = &mut self.live[side_index(side)];
        while !live.is_empty() {
            let i = self.rng.random_range(0..live.len());
            match self.book.order(live[i]) {
                Some(o) => return Some(o.clone()),
                None => {
                    live.swap_remove(i);
                }
            }
        }
        None
    }

    fn cancel_event(&mut self, side: Side) -> Option<LobsterEvent> {
        let order = self.random_resting(side)?;
        let partial = order.quantity > 1 && self.rng.random_bool(0.5);
        let (event_type, size) = if partial {
            let cut = self.rng.random_range(1..order.quantity);
            self.book.reduce(order.order_id, cut).expect("order is resting");
            (EventType::PartialCancel, cut)
        } else {
            self.book.cancel(order.order_id).expect("order is resting");
            (EventType::Delete, order.quantity)
        };
        Some(LobsterEvent {
            time: self.now,
            event_type,
            order_id: order.order_id,
            size,
            price: order.price,
            direction: Direction::from_side(side),
        })
    }

    fn execution_event(&mut self, side: Side) -> Option<LobsterEvent> {
        let front = self.book.resting_front(side)?;
        let size = self.sample_size().min(front.quantity);
        self.book.reduce(front.order_id, size).expect("order is resting");
        Some(LobsterEvent {
            time: self.now,
            event_type: EventType::VisibleExecution,
            order_id: front.order_id,
            size,
            price: front.price,
            direction: Direction::from_side(side),
        })
    }

    fn limit_event(&mut self, side: Side) -> LobsterEvent {
        let grid = self.config.grid_ticks;
        let steps = 1 + self.offsets.sample(&mut self.rng) as Price;
        let price = match side {
            Side::Bid => self.best(Side::Ask) - steps * grid,
            Side::Ask => self.best(Side::Bid) + steps * grid,
        }
        .max(grid);
        let size = self.sample_size();
        self.new_limit(side, price, size)
    }
}

impl Iterator for SyntheticFlow {
    type Item = LobsterEvent;

    fn next(&mut self) -> Option<LobsterEvent> {
        if let Some(e) = self.seeded.pop() {
            return Some(e);
        }
        let gap = self.interarrival.sample(&mut self.rng);
        let t = self.now.0 as f64 + (gap * NANOS_PER_SECOND as f64).round();
        if t >= self.config.session_end.0 as f64 {
            self.now = self.config.session_end;
            return None;
        }
        self.now = SimTime(t as u64);
        let side = if self.rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
        let u: f64 = self.rng.random();
        let event = if u < self.config.cancel_probability {
            self.cancel_event(side)
        } else if u < self.config.cancel_probability + self.config.execution_probability {
            self.execution_event(side)
        } else {
            None
        };
        Some(event.unwrap_or_else(|| self.limit_event(side)))
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    seed: u64,
    event_count: usize,
    config: &'a SyntheticFlowConfig,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Write the events as a LOBSTER message file plus a `<file>.meta.json`
/// sidecar carrying the seed and full generator config.
pub fn write_synthetic(path: &Path, events: &[LobsterEvent], config: &SyntheticFlowConfig) -> io::Result<PathBuf> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    super::write_events(&mut out, events)?;
    out.flush()?;
    let meta = sidecar_path(path);
    let sidecar = Sidecar { seed: config.seed, event_count: events.len(), config };
    fs::write(&meta, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(meta)
}
