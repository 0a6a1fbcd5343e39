use super::{Dense, Gradients, Mlp, MlpError};

/// `s <- rho*s + (1-rho)*g^2`, `theta <- theta - lr * g / (sqrt(s) + eps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub(super) square_avg: Vec<Dense>,
}

impl RmsProp {
    pub fn new(net: &Mlp, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        RmsProp {
            learning_rate,
            decay,
            epsilon,
            square_avg: net.layers().iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn square_averages(&self) -> &[Dense] {
        &self.square_avg
    }

    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<(), MlpError> {
        let shapes = |ls: &[Dense]| ls.iter().map(|l| (l.rows, l.cols)).collect::<Vec<_>>();
        if shapes(&grads.layers) != shapes(net.layers()) || shapes(&self.square_avg) != shapes(net.layers()) {
            return Err(MlpError::Shape { expected: net.sizes(), found: grads_sizes(grads) });
        }
        let (lr, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        let step = |p: &mut f64, s: &mut f64, g: f64| {
            *s = rho * *s + (1.0 - rho) * g * g;
            *p -= lr * g / (s.sqrt() + eps);
        };
        for ((layer, sq), g) in net.layers_mut().iter_mut().zip(&mut self.square_avg).zip(&grads.layers) {
            for ((p, s), g) in layer.weights.iter_mut().zip(&mut sq.weights).zip(&g.weights) {
                step(p, s, *g);
            }
            for ((p, s), g) in layer.biases.iter_mut().zip(&mut sq.biases).zip(&g.biases) {
                step(p, s, *g);
            }
        }
        Ok(())
    }
}

fn grads_sizes(g: &Gradients) -> Vec<usize> {
    let mut s: Vec<usize> = g.layers.first().map(|l| vec![l.cols]).unwrap_or_default();
    s.extend(g.layers.iter().map(|l| l.rows));
    s
}
