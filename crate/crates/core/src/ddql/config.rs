use crate::lob::{Price, Quantity, Side};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdqlConfig {
    pub episodes: usize,
    pub periods: usize,
    pub period: SimTime,
    pub session_start: SimTime,
    pub session_end: SimTime,
    pub side: Side,
    pub parent_quantity: Quantity,

    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub train_every: usize,
    pub target_sync_every: u64,
    pub batch_size: usize,
    pub min_experience: usize,
    pub max_experience: usize,

    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,

    pub multipliers: Vec<f64>,
    pub lambda: f64,
    /// Factor applied to the spread feature (ticks) before it enters the
    /// network; 0.01 turns ticks into cents.
    pub spread_scale: f64,
    /// Price distance between extrapolated levels when the book is shallow.
    pub price_step_ticks: Price,
    /// Act greedily on the target network instead of the evaluation network.
    pub act_with_target_net: bool,
    /// Time allowed for the closing market order to fill before the terminal
    /// reward is taken.
    pub finalize_delay: SimTime,
    pub seed: u64,
}

impl Default for DdqlConfig {
    fn default() -> Self {
        DdqlConfig {
            episodes: 1,
            periods: 660,
            period: SimTime::from_secs(30),
            session_start: SimTime::from_hms(10, 0, 0),
            session_end: SimTime::from_hms(15, 30, 0),
            side: Side::Bid,
            parent_quantity: 6_600,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay: 0.9,
            train_every: 5,
            target_sync_every: 5,
            batch_size: 32,
            min_experience: 200,
            max_experience: 10_000,
            hidden: vec![64, 64],
            dropout: 0.2,
            learning_rate: 0.01,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            multipliers: vec![0.1, 0.5, 1.0, 1.5, 2.0, 2.5],
            lambda: 1.0,
            spread_scale: 0.01,
            price_step_ticks: 100,
            act_with_target_net: false,
            finalize_delay: SimTime::from_secs(1),
            seed: 0,
        }
    }
}

impl DdqlConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma {} outside [0, 1]", self.gamma));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_min", self.epsilon_min)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(format!("{name} {e} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return Err(format!("epsilon_decay {} outside [0, 1]", self.epsilon_decay));
        }
        if self.periods == 0 || self.period == SimTime::ZERO || self.session_end <= self.session_start {
            return Err("empty session".into());
        }
        let span = (self.session_end - self.session_start).0;
        if span != self.period.0 * self.periods as u64 {
            return Err(format!(
                "session {}..{} is not {} periods of {} ns",
                self.session_start, self.session_end, self.periods, self.period.0
            ));
        }
        if self.parent_quantity == 0 {
            return Err("parent_quantity must be positive".into());
        }
        if self.train_every == 0 || self.target_sync_every == 0 || self.batch_size == 0 {
            return Err("train_every, target_sync_every and batch_size must be positive".into());
        }
        if self.max_experience == 0 || self.min_experience > self.max_experience {
            return Err(format!("buffer bounds {}..{}", self.min_experience, self.max_experience));
        }
        if self.multipliers.is_empty() {
            return Err("empty multiplier set".into());
        }
        if self.price_step_ticks <= 0 {
            return Err("price_step_ticks must be positive".into());
        }
        Ok(())
    }

    /// `max(epsilon_min, epsilon_start * decay^episode)`.
    pub fn epsilon_for(&self, episode: u64) -> f64 {
        let decayed = self.epsilon_start * self.epsilon_decay.powi(episode.min(i32::MAX as u64) as i32);
        decayed.max(self.epsilon_min).min(1.0)
    }

    pub fn twap_child_quantity(&self) -> Quantity {
        self.parent_quantity / self.periods as Quantity
    }

    pub fn period_start(&self, i: usize) -> SimTime {
        self.session_start + SimTime(self.period.0 * i as u64)
    }

    pub fn layer_sizes(&self, actions: usize) -> Vec<usize> {
        let mut s = vec![crate::rl::FEATURE_COUNT];
        s.extend(&self.hidden);
        s.push(actions);
        s
    }
}
