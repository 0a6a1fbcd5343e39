use super::config::DdqlConfig;
use crate::mlp::{Mlp, MlpError, RmsProp};
use crate::rl::{Action, ActionSpace, Experience, ReplayBuffer, StateVector};
use crate::rng::{rng_for, SimRng};
use rand::Rng;
use rand::SeedableRng;

/// Index of the largest value, lowest index on ties.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate() {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, else the greedy one.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// `y = r` for terminal experiences, otherwise
/// `y = r + gamma * Q_target(s', argmax_a Q_eval(s', a))`.
pub fn compute_target(
    batch: &[&Experience],
    gamma: f64,
    eval_net: &Mlp,
    target_net: &Mlp,
    encode: impl Fn(&StateVector) -> Vec<f64>,
) -> Result<Vec<f64>, MlpError> {
    batch
        .iter()
        .map(|e| {
            if e.terminal {
                return Ok(e.reward);
            }
            let x = encode(&e.next_state);
            let best = argmax(&eval_net.predict(&x)?);
            Ok(e.reward + gamma * target_net.predict(&x)?[best])
        })
        .collect()
}

/// Everything that persists across episodes: both networks, the optimizer,
/// the replay buffer and the schedule counters.
#[derive(Clone, Debug)]
pub struct Learner {
    pub(super) config: DdqlConfig,
    pub(super) space: ActionSpace,
    pub(super) eval_net: Mlp,
    pub(super) target_net: Mlp,
    pub(super) optimizer: RmsProp,
    pub(super) buffer: ReplayBuffer,
    pub(super) epsilon: f64,
    pub(super) episodes_done: u64,
    pub(super) train_steps: u64,
    pub(super) target_syncs: u64,
    /// When false the learner only acts: no storage, no training.
    pub(super) learning: bool,
    rng: SimRng,
    episode_losses: Vec<f64>,
}

impl Learner {
    pub fn new(config: DdqlConfig) -> Result<Self, String> {
        config.validate()?;
        let space = ActionSpace::new(config.multipliers.clone())?;
        let sizes = config.layer_sizes(space.len());
        let mut init_rng = rng_for(config.seed, u64::MAX);
        let eval_net = Mlp::new(&sizes, config.dropout, &mut init_rng).map_err(|e| e.to_string())?;
        let target_net = eval_net.copy_params();
        let optimizer = RmsProp::new(&eval_net, config.learning_rate, config.rms_decay, config.rms_epsilon);
        let buffer = ReplayBuffer::new(config.min_experience, config.max_experience).map_err(|e| e.to_string())?;
        Ok(Learner {
            epsilon: config.epsilon_for(0),
            space,
            eval_net,
            target_net,
            optimizer,
            buffer,
            episodes_done: 0,
            train_steps: 0,
            target_syncs: 0,
            learning: true,
            rng: SimRng::seed_from_u64(config.seed),
            episode_losses: Vec::new(),
            config,
        })
    }

    pub(super) fn from_parts(
        config: DdqlConfig,
        eval_net: Mlp,
        target_net: Mlp,
        optimizer: RmsProp,
        buffer: ReplayBuffer,
        epsilon: f64,
        counters: (u64, u64, u64),
    ) -> Result<Self, String> {
        let mut l = Learner::new(config)?;
        let expected = l.eval_net.sizes();
        for net in [&eval_net, &target_net] {
            if net.sizes() != expected {
                return Err(format!("network sizes {:?} do not match config {:?}", net.sizes(), expected));
            }
        }
        l.eval_net = eval_net;
        l.target_net = target_net;
        l.optimizer = optimizer;
        l.buffer = buffer;
        l.epsilon = epsilon;
        (l.episodes_done, l.train_steps, l.target_syncs) = counters;
        Ok(l)
    }

    pub fn config(&self) -> &DdqlConfig {
        &self.config
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn eval_net(&self) -> &Mlp {
        &self.eval_net
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target_net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn target_syncs(&self) -> u64 {
        self.target_syncs
    }

    pub fn is_learning(&self) -> bool {
        self.learning
    }

    /// Greedy, frozen policy for evaluation runs.
    pub fn freeze(&mut self) {
        self.learning = false;
        self.epsilon = 0.0;
    }

    /// Reset the per-episode RNG and exploration rate. The RNG stream is a
    /// function of the seed and episode index only.
    pub fn begin_episode(&mut self, episode: u64) {
        self.rng = rng_for(self.config.seed, episode);
        if self.learning {
            self.epsilon = self.config.epsilon_for(episode);
        }
        self.episode_losses.clear();
    }

    pub fn end_episode(&mut self) {
        if self.learning {
            self.episodes_done += 1;
        }
    }

    pub fn mean_episode_loss(&self) -> Option<f64> {
        if self.episode_losses.is_empty() {
            return None;
        }
        Some(self.episode_losses.iter().sum::<f64>() / self.episode_losses.len() as f64)
    }

    /// Network input for a state.
    pub fn encode(&self, s: &StateVector) -> Vec<f64> {
        encode_state(s, self.config.spread_scale)
    }

    pub fn q_values(&self, s: &StateVector) -> Result<Vec<f64>, MlpError> {
        let net = if self.config.act_with_target_net { &self.target_net } else { &self.eval_net };
        net.predict(&self.encode(s))
    }

    pub fn act(&mut self, s: &StateVector) -> Result<Action, MlpError> {
        let q = self.q_values(s)?;
        let idx = select_action(&q, self.epsilon, &mut self.rng);
        Ok(self.space.decode(idx).expect("index within action space"))
    }

    pub fn store(&mut self, e: Experience) {
        if self.learning {
            self.buffer.push(e);
        }
    }

    /// Period-boundary training check: train when the buffer is ready and
    /// `period % train_every == 0`, then sync the target network every
    /// `target_sync_every` trainings. Returns whether a training step ran.
    pub fn on_period(&mut self, period: usize) -> Result<bool, MlpError> {
        if !self.learning || !self.buffer.is_ready() || !period.is_multiple_of(self.config.train_every) {
            return Ok(false);
        }
        let loss = self.train_once()?;
        self.episode_losses.push(loss);
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_sync_every) {
            self.sync_target();
        }
        Ok(true)
    }

    pub fn sync_target(&mut self) {
        self.target_net = self.eval_net.copy_params();
        self.target_syncs += 1;
    }

    fn train_once(&mut self) -> Result<f64, MlpError> {
        let spread_scale = self.config.spread_scale;
        let batch = self
            .buffer
            .sample(self.config.batch_size, &mut self.rng)
            .map_err(|e| MlpError::Batch(e.to_string()))?;
        let targets = compute_target(&batch, self.config.gamma, &self.eval_net, &self.target_net, |s| {
            encode_state(s, spread_scale)
        })?;
        let inputs: Vec<Vec<f64>> = batch.iter().map(|e| encode_state(&e.state, spread_scale)).collect();
        let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
        self.eval_net.train_step(&mut self.optimizer, &inputs, &actions, &targets, &mut self.rng)
    }
}

pub fn encode_state(s: &StateVector, spread_scale: f64) -> Vec<f64> {
    let mut a = s.to_array();
    a[2] *= spread_scale;
    a.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn warm(learner: &mut Learner, n: usize) {
        for i in 0..n {
            let s = StateVector { time_remaining: (i % 7) as f64 / 7.0, ..Default::default() };
            learner.store(Experience { state: s, action: i % 24, reward: 0.01, next_state: s, terminal: i % 60 == 59 });
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        assert_eq!(argmax(&[1.0; 24]), 0);
        let mut q = vec![0.0; 24];
        q[7] = 1.0;
        let mut rng = rng_for(0, 0);
        assert!((0..100).all(|_| select_action(&q, 0.0, &mut rng) == 7));
    }

    #[test]
    fn target_examples() {
        let mut eval = Mlp::zeros(&[6, 24], 0.0).unwrap();
        eval.layers_mut()[0].biases[3] = 1.0;
        let mut target = Mlp::zeros(&[6, 24], 0.0).unwrap();
        target.layers_mut()[0].biases[3] = 0.5;
        target.layers_mut()[0].biases[9] = 2.0;
        let s = StateVector::default();
        let e = Experience { state: s, action: 0, reward: 0.1, next_state: s, terminal: false };
        let t = Experience { reward: 0.4, terminal: true, ..e };
        let enc = |s: &StateVector| s.to_array().to_vec();
        let y = compute_target(&[&e, &t], 0.99, &eval, &target, enc).unwrap();
        assert!((y[0] - 0.595).abs() < 1e-15);
        assert_eq!(y[1], 0.4);
        let y0 = compute_target(&[&e], 0.0, &eval, &target, enc).unwrap();
        assert_eq!(y0, vec![0.1]);
    }

    #[test]
    fn no_training_below_min_experience() {
        let mut l = Learner::new(DdqlConfig { min_experience: 200, ..Default::default() }).unwrap();
        warm(&mut l, 199);
        for i in 0..660 {
            assert!(!l.on_period(i).unwrap());
        }
        assert_eq!(l.train_steps(), 0);
    }

    #[test]
    fn cadence_with_prewarmed_buffer() {
        let mut l = Learner::new(DdqlConfig { hidden: vec![8], ..Default::default() }).unwrap();
        warm(&mut l, 200);
        for i in 0..660 {
            l.on_period(i).unwrap();
        }
        assert_eq!((l.train_steps(), l.target_syncs()), (132, 26));
    }

    #[test]
    fn target_net_constant_between_syncs() {
        let mut l = Learner::new(DdqlConfig { hidden: vec![8], min_experience: 10, ..Default::default() }).unwrap();
        warm(&mut l, 50);
        let probe = l.encode(&StateVector { spread: 100.0, ..Default::default() });
        let mut last = (l.target_syncs(), l.target_net().predict(&probe).unwrap());
        for i in 0..200 {
            l.on_period(i).unwrap();
            let now = l.target_net().predict(&probe).unwrap();
            if l.target_syncs() == last.0 {
                assert_eq!(now, last.1);
            }
            last = (l.target_syncs(), now);
        }
        assert!(l.target_syncs() > 2);
    }

    #[test]
    fn frozen_learner_neither_stores_nor_trains() {
        let mut l = Learner::new(DdqlConfig { hidden: vec![8], min_experience: 1, ..Default::default() }).unwrap();
        warm(&mut l, 5);
        l.freeze();
        warm(&mut l, 5);
        assert_eq!(l.buffer().len(), 5);
        assert!(!l.on_period(0).unwrap());
        assert_eq!(l.epsilon(), 0.0);
    }
}
