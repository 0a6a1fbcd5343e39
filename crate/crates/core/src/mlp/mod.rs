//! Fully connected Q-network: dense layers with ReLU and inverted dropout on
//! the hidden layers, a linear output layer, and hand-written backprop for a
//! loss that only touches the taken action's output.

mod checkpoint;
mod rmsprop;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use rmsprop::RmsProp;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("expected input of length {expected}, got {got}")]
    InputSize { expected: usize, got: usize },
    #[error("invalid batch: {0}")]
    Batch(String),
    #[error("non-finite loss {loss} ({detail})")]
    NonFinite { loss: f64, detail: String },
    #[error("shape mismatch: expected layer sizes {expected:?}, found {found:?}")]
    Shape { expected: Vec<usize>, found: Vec<usize> },
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// `rows` outputs by `cols` inputs, weights row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense { rows, cols, weights: vec![0.0; rows * cols], biases: vec![0.0; rows] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }
}

/// Gradients with the same layout as the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    dropout: f64,
}

struct Trace {
    /// Input fed to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer; the last one is the output.
    pre: Vec<Vec<f64>>,
    /// Per hidden layer: 0 for dropped units, `1/(1-p)` otherwise.
    masks: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], dropout: f64, rng: &mut R) -> Result<Self, MlpError> {
        let mut net = Mlp::zeros(sizes, dropout)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.cols as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], dropout: f64) -> Result<Self, MlpError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(MlpError::Architecture(format!("layer sizes {sizes:?}")));
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[1], w[0])).collect();
        Mlp::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<Dense>, dropout: f64) -> Result<Self, MlpError> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(MlpError::Architecture(format!("dropout rate {dropout} outside [0, 1)")));
        }
        if layers.is_empty() {
            return Err(MlpError::Architecture("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.rows == 0 || l.cols == 0 || l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
                return Err(MlpError::Architecture(format!("layer {i} is inconsistent")));
            }
            if i > 0 && layers[i - 1].rows != l.cols {
                return Err(MlpError::Architecture(format!(
                    "layer {i} takes {} inputs but layer {} has {} outputs",
                    l.cols,
                    i - 1,
                    layers[i - 1].rows
                )));
            }
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(MlpError::Architecture(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Mlp { layers, dropout })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].cols];
        s.extend(self.layers.iter().map(|l| l.rows));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.input_size() {
            return Err(MlpError::InputSize { expected: self.input_size(), got: input.len() });
        }
        Ok(())
    }

    fn trace<R: Rng + ?Sized>(&self, input: &[f64], mode: Mode, rng: &mut R) -> Trace {
        let keep = 1.0 - self.dropout;
        let hidden = self.layers.len() - 1;
        let mut t = Trace { inputs: Vec::new(), pre: Vec::new(), masks: Vec::new() };
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&x);
            t.inputs.push(x);
            if i < hidden {
                let mask: Vec<f64> = match mode {
                    Mode::Train if self.dropout > 0.0 => {
                        (0..z.len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
                    }
                    _ => vec![1.0; z.len()],
                };
                x = z.iter().zip(&mask).map(|(v, m)| v.max(0.0) * m).collect();
                t.masks.push(mask);
            } else {
                x = Vec::new();
            }
            t.pre.push(z);
        }
        t
    }

    /// Q-values for one input. `rng` only draws dropout masks in TRAIN mode.
    pub fn forward<R: Rng + ?Sized>(&self, input: &[f64], mode: Mode, rng: &mut R) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        Ok(self.trace(input, mode, rng).pre.pop().expect("at least one layer"))
    }

    /// Deterministic EVAL-mode forward pass.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.apply(&x);
            if i < last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x)
    }

    /// Pre-activations of every layer, output last.
    pub fn pre_activations<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>, MlpError> {
        self.check_input(input)?;
        Ok(self.trace(input, mode, rng).pre)
    }

    /// Mean over the batch of `(Q(s, a) - y)^2` and its gradient, which only
    /// flows through the taken action's output unit.
    pub fn loss_and_gradients<R: Rng + ?Sized>(
        &self,
        inputs: &[Vec<f64>],
        actions: &[usize],
        targets: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(f64, Gradients), MlpError> {
        if inputs.is_empty() || inputs.len() != actions.len() || inputs.len() != targets.len() {
            return Err(MlpError::Batch(format!(
                "{} inputs, {} actions, {} targets",
                inputs.len(),
                actions.len(),
                targets.len()
            )));
        }
        if let Some(a) = actions.iter().find(|&&a| a >= self.output_size()) {
            return Err(MlpError::Batch(format!("action {a} out of range")));
        }
        if let Some(y) = targets.iter().find(|y| !y.is_finite()) {
            return Err(MlpError::Batch(format!("non-finite target {y}")));
        }
        let n = inputs.len() as f64;
        let mut grads = Gradients { layers: self.layers.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect() };
        let mut loss = 0.0;
        for ((x, &a), &y) in inputs.iter().zip(actions).zip(targets) {
            self.check_input(x)?;
            let t = self.trace(x, mode, rng);
            let q = t.pre.last().expect("output")[a];
            let err = q - y;
            loss += err * err;

            let mut delta = vec![0.0; self.output_size()];
            delta[a] = 2.0 * err / n;
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let g = &mut grads.layers[l];
                let input = &t.inputs[l];
                for (r, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    g.biases[r] += d;
                    let row = &mut g.weights[r * layer.cols..(r + 1) * layer.cols];
                    row.iter_mut().zip(input).for_each(|(w, v)| *w += d * v);
                }
                if l == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.cols];
                for (r, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
                }
                let (z, m) = (&t.pre[l - 1], &t.masks[l - 1]);
                delta = back
                    .iter()
                    .zip(z)
                    .zip(m)
                    .map(|((b, z), m)| if *z > 0.0 { b * m } else { 0.0 })
                    .collect();
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(MlpError::NonFinite {
                loss,
                detail: format!("batch of {}, targets in [{}, {}]", inputs.len(), min(targets), max(targets)),
            });
        }
        Ok((loss, grads))
    }

    /// One TRAIN-mode gradient step; returns the batch loss before the update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        opt: &mut RmsProp,
        inputs: &[Vec<f64>],
        actions: &[usize],
        targets: &[f64],
        rng: &mut R,
    ) -> Result<f64, MlpError> {
        let (loss, grads) = self.loss_and_gradients(inputs, actions, targets, Mode::Train, rng)?;
        opt.apply(self, &grads)?;
        Ok(loss)
    }

    /// Deep copy; later updates to `self` do not affect it.
    pub fn copy_params(&self) -> Mlp {
        self.clone()
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
