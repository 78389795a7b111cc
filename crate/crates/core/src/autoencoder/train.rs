use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::backprop::{batch_gradients, Gradients, Loss};
use super::network::NetworkParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Standard deviation of the Gaussian input corruption.
    pub noise_sigma: f64,
    pub seed: u64,
    pub loss: Loss,
    pub optimizer: AdadeltaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 256,
            noise_sigma: 2.0,
            seed: 0,
            loss: Loss::BinaryCrossEntropy,
            optimizer: AdadeltaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
    /// Multiplier on the adaptive step; `0` freezes the parameters.
    pub learning_rate: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
            learning_rate: 1.0,
        }
    }
}

/// Adadelta state: decayed averages of squared gradients and squared updates
/// for every parameter.
///
/// ```text
/// E[g²] = ρ E[g²] + (1 - ρ) g²
/// Δ     = -sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²] = ρ E[Δ²] + (1 - ρ) Δ²
/// w     = w + lr · Δ
/// ```
#[derive(Debug, Clone)]
pub struct Adadelta {
    cfg: AdadeltaConfig,
    grad_sq: Vec<Vec<f64>>,
    update_sq: Vec<Vec<f64>>,
}

impl Adadelta {
    pub fn new(net: &NetworkParams, cfg: AdadeltaConfig) -> Self {
        let shapes: Vec<usize> = net
            .layers()
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Self {
            cfg,
            grad_sq: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            update_sq: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, net: &mut NetworkParams, grads: &Gradients) {
        let AdadeltaConfig {
            rho,
            epsilon,
            learning_rate,
        } = self.cfg;
        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            let params = [
                (&mut layer.weights, &grads.weights[k], 2 * k),
                (&mut layer.bias, &grads.biases[k], 2 * k + 1),
            ];
            for (values, g, slot) in params {
                let eg = &mut self.grad_sq[slot];
                let ex = &mut self.update_sq[slot];
                for i in 0..values.len() {
                    eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
                    let delta = -((ex[i] + epsilon).sqrt() / (eg[i] + epsilon).sqrt()) * g[i];
                    ex[i] = rho * ex[i] + (1.0 - rho) * delta * delta;
                    values[i] += learning_rate * delta;
                }
            }
        }
    }
}

/// Trained network and the mean per-example loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: NetworkParams,
    pub epoch_loss: Vec<f64>,
}

/// Trains `net` as a denoising autoencoder, minimizing the mean
/// per-example loss of each batch.
///
/// Each epoch visits the data in a seeded random order. Inputs are corrupted
/// with `N(0, σ²)` noise and clipped to `[0, 1]`; the clean input is the
/// target.
pub fn train(mut net: NetworkParams, data: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if !(cfg.noise_sigma >= 0.0) || !cfg.noise_sigma.is_finite() {
        return Err(Error::invalid("noise sigma must be finite and non-negative"));
    }
    for x in data {
        if x.len() != net.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "training vector",
                expected: net.input_dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training vector"));
        }
        cfg.loss.check(&net, x)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut opt = Adadelta::new(&net, cfg.optimizer);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inputs: Vec<Vec<f64>> = batch
                .iter()
                .map(|&i| corrupt(&data[i], cfg.noise_sigma, &noise, &mut rng))
                .collect();
            let targets: Vec<&[f64]> = batch.iter().map(|&i| data[i].as_slice()).collect();
            let (mut grads, loss) = batch_gradients(&net, &inputs, &targets, cfg.loss);
            grads.scale(1.0 / batch.len() as f64);
            total += loss;
            opt.step(&mut net, &grads);
        }
        epoch_loss.push(total / data.len() as f64);
    }
    Ok(TrainOutcome { net, epoch_loss })
}

fn corrupt(x: &[f64], sigma: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return x.to_vec();
    }
    x.iter()
        .map(|&v| (v + noise.sample(rng)).clamp(0.0, 1.0))
        .collect()
}
