use lobsim::mlp::{Mlp, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let inputs = (0..n).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let actions = (0..n).map(|_| rng.random_range(0..24)).collect();
    let targets = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (inputs, actions, targets)
}

fn loss(net: &Mlp, x: &[Vec<f64>], a: &[usize], y: &[f64]) -> f64 {
    x.iter().zip(a).zip(y).map(|((x, &a), y)| (net.predict(x).unwrap()[a] - y).powi(2)).sum::<f64>() / x.len() as f64
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let net = Mlp::new(&[6, 8, 24], 0.0, &mut rng).unwrap();
        let (x, a, y) = batch(&mut rng, 4);
        let (_, grads) = net.loss_and_gradients(&x, &a, &y, Mode::Eval, &mut rng).unwrap();
        for l in 0..net.layers().len() {
            let nw = net.layers()[l].weights.len();
            for p in 0..nw + net.layers()[l].biases.len() {
                let nudge = |d: f64| {
                    let mut m = net.clone();
                    let layer = &mut m.layers_mut()[l];
                    if p < nw { layer.weights[p] += d } else { layer.biases[p - nw] += d }
                    loss(&m, &x, &a, &y)
                };
                let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
                let g = &grads.layers[l];
                let analytic = if p < nw { g.weights[p] } else { g.biases[p - nw] };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn inverted_dropout_preserves_expected_preactivation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = Mlp::new(&[6, 16, 16, 24], 0.3, &mut rng).unwrap();
    let x = [0.4, -0.2, 0.9, 0.1, -0.7, 0.3];
    let eval = net.pre_activations(&x, Mode::Eval, &mut rng).unwrap();
    let masks = 20_000;
    // The second layer's pre-activation depends only on the first dropout mask.
    let mut sum2 = [0.0; 16];
    let mut sq2 = [0.0; 16];
    for _ in 0..masks {
        let pre = net.pre_activations(&x, Mode::Train, &mut rng).unwrap();
        for (i, v) in pre[1].iter().enumerate() {
            sum2[i] += v;
            sq2[i] += v * v;
        }
    }
    let n = masks as f64;
    for i in 0..16 {
        let mean = sum2[i] / n;
        let se = ((sq2[i] / n - mean * mean).max(0.0) / n).sqrt();
        assert!((mean - eval[1][i]).abs() <= 3.0 * se + 1e-12, "unit {i}: {mean} vs {}", eval[1][i]);
    }
}
