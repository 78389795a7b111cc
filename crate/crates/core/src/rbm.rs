//! Restricted Boltzmann machines trained with one-step contrastive
//! divergence, stackable into autoencoder initial weights.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{logistic, Activation, Layer, NetworkParams};
use crate::error::{Error, Result};
use crate::par;

/// Largest `n_visible + n_hidden` for which [`RbmParams::partition_function`]
/// will enumerate configurations.
pub const MAX_ENUMERATED_UNITS: usize = 20;

/// Weights `w_ij` (stored `n_hidden x n_visible`, row `j` per hidden unit),
/// visible biases `a_i` and hidden biases `b_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            weights: vec![0.0; n_visible * n_hidden],
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
        }
    }

    /// Small random weights `N(0, scale²)`, zero biases.
    pub fn init(n_visible: usize, n_hidden: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(Error::invalid("RBM layers must be non-empty"));
        }
        let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rbm = Self::zeros(n_visible, n_hidden);
        rbm.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        Ok(rbm)
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = [
            ("rbm weights", self.n_visible * self.n_hidden, self.weights.len()),
            ("rbm visible bias", self.n_visible, self.visible_bias.len()),
            ("rbm hidden bias", self.n_hidden, self.hidden_bias.len()),
        ];
        for (context, expected, found) in shapes {
            if expected != found {
                return Err(Error::ShapeMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        let all = self
            .weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rbm parameters"));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[j * self.n_visible + i]
    }

    fn check_visible(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_visible {
            return Err(Error::ShapeMismatch {
                context: "rbm visible vector",
                expected: self.n_visible,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn check_hidden(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.n_hidden {
            return Err(Error::ShapeMismatch {
                context: "rbm hidden vector",
                expected: self.n_hidden,
                found: h.len(),
            });
        }
        Ok(())
    }

    /// `E(v, h) = -(Σ a_i v_i + Σ b_j h_j + Σ v_i h_j w_ij)`.
    pub fn energy(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        Ok(self.energy_unchecked(v, h))
    }

    fn energy_unchecked(&self, v: &[f64], h: &[f64]) -> f64 {
        let mut neg = 0.0;
        for (a, x) in self.visible_bias.iter().zip(v) {
            neg += a * x;
        }
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                let row = &self.weights[j * self.n_visible..(j + 1) * self.n_visible];
                neg += hj * (self.hidden_bias[j] + row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>());
            }
        }
        -neg
    }

    /// `Z = Σ_{v,h} exp(-E(v, h))` by exhaustive enumeration.
    pub fn partition_function(&self) -> Result<f64> {
        let units = self.n_visible + self.n_hidden;
        if units > MAX_ENUMERATED_UNITS {
            return Err(Error::invalid(format!(
                "partition function enumeration is capped at {MAX_ENUMERATED_UNITS} units, got {units}"
            )));
        }
        let per_visible = par::map_range(1usize << self.n_visible, 64, |vm| {
            let v = bits(vm, self.n_visible);
            (0..1usize << self.n_hidden)
                .map(|hm| (-self.energy_unchecked(&v, &bits(hm, self.n_hidden))).exp())
                .sum::<f64>()
        });
        Ok(per_visible.iter().sum())
    }

    /// `p(h_j = 1 | v) = σ(b_j + Σ_i v_i w_ij)`.
    pub fn hidden_probs(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_visible(v)?;
        Ok(self.hidden_probs_unchecked(v))
    }

    fn hidden_probs_unchecked(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| {
                let row = &self.weights[j * self.n_visible..(j + 1) * self.n_visible];
                logistic(self.hidden_bias[j] + row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>())
            })
            .collect()
    }

    /// `p(v_i = 1 | h) = σ(a_i + Σ_j h_j w_ij)`.
    pub fn visible_probs(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_hidden(h)?;
        Ok(self.visible_probs_unchecked(h))
    }

    fn visible_probs_unchecked(&self, h: &[f64]) -> Vec<f64> {
        let mut acc = self.visible_bias.clone();
        for (j, &hj) in h.iter().enumerate() {
            if hj != 0.0 {
                let row = &self.weights[j * self.n_visible..(j + 1) * self.n_visible];
                for (s, w) in acc.iter_mut().zip(row) {
                    *s += hj * w;
                }
            }
        }
        acc.into_iter().map(logistic).collect()
    }

    /// One CD1 update on a batch, averaged over the batch:
    ///
    /// `Δw_ij = η (<v_i h*_j>_data - <v*_i p(h_j|v*)>_model)`, with matching
    /// bias updates. `h*` and `v*` are sampled by comparing uniform draws to
    /// the conditional probabilities.
    pub fn cd1_step(&mut self, batch: &[Vec<f64>], learning_rate: f64, rng: &mut impl Rng) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("CD1 batch"));
        }
        for v in batch {
            self.check_visible(v)?;
        }
        let (nv, nh) = (self.n_visible, self.n_hidden);
        let mut dw = vec![0.0; nv * nh];
        let mut da = vec![0.0; nv];
        let mut db = vec![0.0; nh];
        for v in batch {
            let ph = self.hidden_probs_unchecked(v);
            let h_sample: Vec<f64> = ph.iter().map(|&p| sample(p, rng)).collect();
            let pv = self.visible_probs_unchecked(&h_sample);
            let v_sample: Vec<f64> = pv.iter().map(|&p| sample(p, rng)).collect();
            let ph_model = self.hidden_probs_unchecked(&v_sample);
            for j in 0..nh {
                let row = &mut dw[j * nv..(j + 1) * nv];
                for i in 0..nv {
                    row[i] += v[i] * h_sample[j] - v_sample[i] * ph_model[j];
                }
                db[j] += h_sample[j] - ph_model[j];
            }
            for i in 0..nv {
                da[i] += v[i] - v_sample[i];
            }
        }
        let step = learning_rate / batch.len() as f64;
        for (w, d) in self.weights.iter_mut().zip(&dw) {
            *w += step * d;
        }
        for (a, d) in self.visible_bias.iter_mut().zip(&da) {
            *a += step * d;
        }
        for (b, d) in self.hidden_bias.iter_mut().zip(&db) {
            *b += step * d;
        }
        Ok(())
    }

    /// Mean squared error of the mean-field reconstruction `p(v | p(h | v))`.
    pub fn reconstruction_error(&self, data: &[Vec<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("reconstruction data"));
        }
        let mut total = 0.0;
        for v in data {
            let r = self.visible_probs_unchecked(&self.hidden_probs(v)?);
            total += v.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (data.len() * self.n_visible) as f64)
    }
}

fn sample(p: f64, rng: &mut impl Rng) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Binary expansion of `mask` into `n` units, bit 0 first.
pub(crate) fn bits(mask: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((mask >> i) & 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbmTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for RbmTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.1,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

/// Trains one RBM on `data` with shuffled mini-batches.
pub fn train_rbm(n_hidden: usize, data: &[Vec<f64>], cfg: &RbmTrainConfig, rng: &mut ChaCha8Rng) -> Result<RbmParams> {
    let n_visible = data.first().ok_or(Error::Empty("RBM training data"))?.len();
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut rbm = RbmParams::init(n_visible, n_hidden, cfg.init_scale, rng)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| data[i].clone()).collect();
            rbm.cd1_step(&batch, cfg.learning_rate, rng)?;
        }
    }
    Ok(rbm)
}

/// Greedy layer-wise pretraining. Layer `k + 1` is trained on the hidden
/// probabilities of layer `k`.
pub fn pretrain_stack(layer_dims: &[usize], data: &[Vec<f64>], cfg: &RbmTrainConfig) -> Result<Vec<RbmParams>> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid("an RBM stack needs at least two layer dimensions"));
    }
    if data.is_empty() {
        return Err(Error::Empty("RBM training data"));
    }
    if let Some(v) = data.iter().find(|v| v.len() != layer_dims[0]) {
        return Err(Error::ShapeMismatch {
            context: "RBM training vector",
            expected: layer_dims[0],
            found: v.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stack = Vec::with_capacity(layer_dims.len() - 1);
    let mut layer_data = data.to_vec();
    for &n_hidden in &layer_dims[1..] {
        let rbm = train_rbm(n_hidden, &layer_data, cfg, &mut rng)?;
        layer_data = par::map_slice(&layer_data, 32, |v| rbm.hidden_probs_unchecked(v));
        stack.push(rbm);
    }
    Ok(stack)
}

/// Mirrors a trained stack into an all-logistic autoencoder: encoder layers
/// use each RBM's weights and hidden biases in order, decoder layers the
/// transposed weights and visible biases in reverse order.
pub fn unroll(stack: &[RbmParams]) -> Result<NetworkParams> {
    if stack.is_empty() {
        return Err(Error::Empty("RBM stack"));
    }
    for rbm in stack {
        rbm.validate()?;
    }
    let mut layers = Vec::with_capacity(stack.len() * 2);
    for rbm in stack {
        layers.push(Layer {
            inputs: rbm.n_visible,
            outputs: rbm.n_hidden,
            weights: rbm.weights.clone(),
            bias: rbm.hidden_bias.clone(),
            activation: Activation::Logistic,
        });
    }
    for rbm in stack.iter().rev() {
        let mut transposed = vec![0.0; rbm.weights.len()];
        for j in 0..rbm.n_hidden {
            for i in 0..rbm.n_visible {
                transposed[i * rbm.n_hidden + j] = rbm.weight(i, j);
            }
        }
        layers.push(Layer {
            inputs: rbm.n_hidden,
            outputs: rbm.n_visible,
            weights: transposed,
            bias: rbm.visible_bias.clone(),
            activation: Activation::Logistic,
        });
    }
    NetworkParams::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rbm(nv: usize, nh: usize, seed: u64) -> RbmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rbm = RbmParams::init(nv, nh, 1.0, &mut rng).unwrap();
        for b in rbm.visible_bias.iter_mut().chain(rbm.hidden_bias.iter_mut()) {
            *b = rng.random::<f64>() * 2.0 - 1.0;
        }
        rbm
    }

    #[test]
    fn energy_examples() {
        let zero = RbmParams::zeros(3, 2);
        assert_eq!(zero.energy(&[0.0; 3], &[0.0; 2]).unwrap(), 0.0);

        let rbm = RbmParams {
            n_visible: 1,
            n_hidden: 1,
            weights: vec![2.0],
            visible_bias: vec![0.5],
            hidden_bias: vec![-0.25],
        };
        assert_eq!(rbm.energy(&[1.0], &[1.0]).unwrap(), -2.25);
        assert!(rbm.energy(&[1.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn energy_is_linear_in_visible_bias() {
        let mut rbm = random_rbm(3, 2, 1);
        let (v, h) = ([1.0, 0.0, 1.0], [0.0, 1.0]);
        let before = -rbm.energy(&v, &h).unwrap();
        let a0 = rbm.visible_bias[0];
        rbm.visible_bias[0] *= 2.0;
        let after = -rbm.energy(&v, &h).unwrap();
        assert!((after - before - a0).abs() < 1e-12);
    }

    #[test]
    fn partition_function_examples() {
        assert_eq!(RbmParams::zeros(2, 1).partition_function().unwrap(), 8.0);
        let rbm = RbmParams {
            n_visible: 1,
            n_hidden: 1,
            weights: vec![2f64.ln()],
            visible_bias: vec![0.0],
            hidden_bias: vec![0.0],
        };
        assert!((rbm.partition_function().unwrap() - 5.0).abs() < 1e-12);
        assert!(random_rbm(4, 3, 2).partition_function().unwrap() > 0.0);
        assert!(RbmParams::zeros(12, 9).partition_function().is_err());
    }

    #[test]
    fn zero_rbm_probabilities_are_one_half() {
        let rbm = RbmParams::zeros(3, 2);
        assert_eq!(rbm.hidden_probs(&[1.0, 0.0, 1.0]).unwrap(), vec![0.5; 2]);
        assert_eq!(rbm.visible_probs(&[1.0, 0.0]).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn hidden_prob_increases_with_bias() {
        let mut rbm = random_rbm(3, 2, 4);
        let v = [1.0, 1.0, 0.0];
        let mut last = 0.0;
        for b in [-5.0, 0.0, 5.0, 20.0] {
            rbm.hidden_bias[1] = b;
            let p = rbm.hidden_probs(&v).unwrap()[1];
            assert!(p > last);
            last = p;
        }
        assert!(last > 0.999_999);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut rbm = random_rbm(4, 3, 5);
        let before = rbm.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        rbm.cd1_step(&[vec![1.0, 0.0, 1.0, 1.0]], 0.0, &mut rng).unwrap();
        assert_eq!(rbm, before);
        assert!(rbm.cd1_step(&[], 0.1, &mut rng).is_err());
    }

    #[test]
    fn cd1_is_deterministic_for_a_seed() {
        let batch = vec![vec![1.0, 0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0, 0.0]];
        let run = || {
            let mut rbm = random_rbm(4, 3, 5);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..10 {
                rbm.cd1_step(&batch, 0.1, &mut rng).unwrap();
            }
            rbm
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn stack_shapes() {
        let data: Vec<Vec<f64>> = (0..20).map(|s| bits(s * 37 % 256, 8)).collect();
        let cfg = RbmTrainConfig {
            epochs: 2,
            batch_size: 5,
            ..RbmTrainConfig::default()
        };
        let stack = pretrain_stack(&[8, 4, 2], &data, &cfg).unwrap();
        assert_eq!(stack.len(), 2);
        assert_eq!((stack[1].n_visible, stack[1].n_hidden), (4, 2));

        let single = pretrain_stack(&[8, 5], &data, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        assert_eq!(single, vec![train_rbm(5, &data, &cfg, &mut rng).unwrap()]);
        assert!(pretrain_stack(&[7, 3], &data, &cfg).is_err());
    }

    #[test]
    fn unroll_mirrors_stack() {
        let stack = vec![random_rbm(6, 4, 1), random_rbm(4, 2, 2)];
        let net = unroll(&stack).unwrap();
        assert_eq!(net.dims(), vec![6, 4, 2, 4, 6]);
        let layers = net.layers();
        let depth = layers.len();
        for k in 0..depth / 2 {
            let enc = &layers[k];
            let dec = &layers[depth - 1 - k];
            for i in 0..enc.inputs {
                for j in 0..enc.outputs {
                    assert_eq!(enc.weight(i, j), dec.weight(j, i));
                }
            }
        }
        assert!(layers.iter().all(|l| l.activation == Activation::Logistic));

        let zeros = unroll(&[RbmParams::zeros(6, 4), RbmParams::zeros(4, 2)]).unwrap();
        assert!(zeros.reconstruct(&[1.0; 6]).unwrap().iter().all(|&r| r == 0.5));
        assert!(unroll(&[]).is_err());
    }
}
