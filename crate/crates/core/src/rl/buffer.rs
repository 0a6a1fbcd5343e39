use super::features::StateVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: StateVector,
    pub action: usize,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BufferError {
    #[error("replay buffer holds {len} experiences, {min} required before sampling")]
    NotReady { len: usize, min: usize },
    #[error("invalid buffer bounds: min {min}, capacity {capacity}")]
    InvalidBounds { min: usize, capacity: usize },
}

/// FIFO experience store; the oldest experience is evicted once full.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    min_experience: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(min_experience: usize, capacity: usize) -> Result<Self, BufferError> {
        if capacity == 0 || min_experience > capacity {
            return Err(BufferError::InvalidBounds { min: min_experience, capacity });
        }
        Ok(ReplayBuffer { capacity, min_experience, items: VecDeque::with_capacity(capacity.min(1 << 16)) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn min_experience(&self) -> usize {
        self.min_experience
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.items.len() >= self.min_experience
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform sample without replacement; `batch_size` is clamped to the
    /// current size.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Experience>, BufferError> {
        if !self.is_ready() || self.items.is_empty() {
            return Err(BufferError::NotReady { len: self.items.len(), min: self.min_experience });
        }
        let n = batch_size.min(self.items.len());
        Ok(rand::seq::index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect())
    }

    /// One row per experience with both state vectors flattened.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        const F: [&str; 6] = ["time_remaining", "quantity_remaining", "spread", "volume_imbalance", "return_1", "return_t"];
        let mut header: Vec<String> = F.iter().map(|f| format!("s_{f}")).collect();
        header.extend(["action".into(), "reward".into()]);
        header.extend(F.iter().map(|f| format!("next_{f}")));
        header.push("terminal".into());
        writeln!(out, "{}", header.join(","))?;
        for e in &self.items {
            let mut row: Vec<String> = e.state.to_array().iter().map(|v| v.to_string()).collect();
            row.push(e.action.to_string());
            row.push(e.reward.to_string());
            row.extend(e.next_state.to_array().iter().map(|v| v.to_string()));
            row.push((e.terminal as u8).to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: usize) -> Experience {
        Experience {
            state: StateVector { time_remaining: tag as f64, ..Default::default() },
            action: tag,
            reward: 0.0,
            next_state: StateVector::default(),
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(1, 3).unwrap();
        for i in 0..4 {
            b.push(exp(i));
        }
        let kept: Vec<usize> = b.iter().map(|e| e.action).collect();
        assert_eq!(kept, vec![1, 2, 3]);
    }

    #[test]
    fn seeded_sampling_repeats() {
        let mut b = ReplayBuffer::new(5, 100).unwrap();
        for i in 0..50 {
            b.push(exp(i));
        }
        let draw = |seed| -> Vec<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.sample(10, &mut rng).unwrap().iter().map(|e| e.action).collect()
        };
        assert_eq!(draw(9), draw(9));
        let mut d = draw(9);
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 10, "no replacement");
    }

    #[test]
    fn not_ready_below_minimum() {
        let mut b = ReplayBuffer::new(3, 10).unwrap();
        b.push(exp(0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(1, &mut rng).unwrap_err(), BufferError::NotReady { len: 1, min: 3 });
    }

    #[test]
    fn oversized_batch_clamps() {
        let mut b = ReplayBuffer::new(2, 10).unwrap();
        for i in 0..4 {
            b.push(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(b.sample(32, &mut rng).unwrap().len(), 4);
    }

    #[test]
    fn csv_has_one_row_per_experience() {
        let mut b = ReplayBuffer::new(0, 10).unwrap();
        b.push(exp(1));
        b.push(exp(2));
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 15);
    }
}
