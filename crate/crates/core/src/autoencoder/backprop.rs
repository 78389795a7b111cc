use serde::{Deserialize, Serialize};

use super::network::{Activation, ForwardPass, NetworkParams};
use crate::error::{Error, Result};
use crate::par;

/// Reconstruction loss, summed over output units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// `-Σ t ln r + (1 - t) ln(1 - r)`; needs a logistic output and targets in `[0, 1]`.
    #[serde(rename = "bce")]
    BinaryCrossEntropy,
    /// `½ Σ (r - t)²`.
    #[serde(rename = "mse")]
    SquaredError,
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(Loss::BinaryCrossEntropy),
            "mse" => Ok(Loss::SquaredError),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

impl Loss {
    pub(crate) fn check(self, net: &NetworkParams, target: &[f64]) -> Result<()> {
        if target.len() != net.output_dim() {
            return Err(Error::ShapeMismatch {
                context: "reconstruction target",
                expected: net.output_dim(),
                found: target.len(),
            });
        }
        if self == Loss::BinaryCrossEntropy {
            if net.layers().last().map(|l| l.activation) != Some(Activation::Logistic) {
                return Err(Error::invalid("binary cross-entropy needs a logistic output layer"));
            }
            if target.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::invalid("binary cross-entropy targets must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Loss of one forward pass against `target`.
    pub fn value(self, pass: &ForwardPass, target: &[f64]) -> f64 {
        match self {
            Loss::BinaryCrossEntropy => {
                // softplus(a) - t·a, stable for any logit a
                let logits = pass.pre.last().expect("output layer");
                logits
                    .iter()
                    .zip(target)
                    .map(|(&a, &t)| a.max(0.0) + (-a.abs()).exp().ln_1p() - t * a)
                    .sum()
            }
            Loss::SquaredError => {
                0.5 * pass
                    .reconstruction()
                    .iter()
                    .zip(target)
                    .map(|(r, t)| (r - t) * (r - t))
                    .sum::<f64>()
            }
        }
    }

    /// `∂E/∂a` at the output layer.
    fn output_delta(self, net: &NetworkParams, pass: &ForwardPass, target: &[f64]) -> Vec<f64> {
        let r = pass.reconstruction();
        match self {
            Loss::BinaryCrossEntropy => r.iter().zip(target).map(|(r, t)| r - t).collect(),
            Loss::SquaredError => {
                let act = net.layers().last().expect("output layer").activation;
                let a = pass.pre.last().expect("output layer");
                r.iter()
                    .zip(target)
                    .zip(a)
                    .map(|((&r, &t), &a)| (r - t) * act.derivative(a, r))
                    .collect()
            }
        }
    }
}

/// Parameter gradients, shape-congruent with the network, plus the error
/// differences `δ` of every layer when computed for a single example.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub deltas: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Self {
            weights: net.layers().iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            deltas: Vec::new(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *v *= factor;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .copied()
    }
}

/// Error differences of every layer, output first propagated back to layer 0.
fn layer_deltas(net: &NetworkParams, pass: &ForwardPass, out_delta: Vec<f64>) -> Vec<Vec<f64>> {
    let layers = net.layers();
    let mut deltas = vec![Vec::new(); layers.len()];
    deltas[layers.len() - 1] = out_delta;
    for k in (0..layers.len() - 1).rev() {
        let next = &layers[k + 1];
        let act = layers[k].activation;
        let mut acc = vec![0.0; layers[k].outputs];
        for (j, &d) in deltas[k + 1].iter().enumerate() {
            if d != 0.0 {
                for (s, &w) in acc.iter_mut().zip(next.row(j)) {
                    *s += w * d;
                }
            }
        }
        for (i, s) in acc.iter_mut().enumerate() {
            *s *= act.derivative(pass.pre[k][i], pass.post[k + 1][i]);
        }
        deltas[k] = acc;
    }
    deltas
}

/// Backpropagation for one example: `∂E/∂w^k_{ij} = δ^k_j z^k_i`.
pub fn backward(
    net: &NetworkParams,
    pass: &ForwardPass,
    target: &[f64],
    loss: Loss,
) -> Result<Gradients> {
    if pass.pre.len() != net.layers().len() || pass.post.len() != net.layers().len() + 1 {
        return Err(Error::ShapeMismatch {
            context: "forward pass depth",
            expected: net.layers().len(),
            found: pass.pre.len(),
        });
    }
    for (k, layer) in net.layers().iter().enumerate() {
        if pass.pre[k].len() != layer.outputs || pass.post[k].len() != layer.inputs {
            return Err(Error::ShapeMismatch {
                context: "forward pass activations",
                expected: layer.outputs,
                found: pass.pre[k].len(),
            });
        }
    }
    loss.check(net, target)?;
    let deltas = layer_deltas(net, pass, loss.output_delta(net, pass, target));
    let mut grads = Gradients::zeros_like(net);
    for (k, layer) in net.layers().iter().enumerate() {
        let z = &pass.post[k];
        for (j, &d) in deltas[k].iter().enumerate() {
            grads.biases[k][j] = d;
            for (g, &zi) in grads.weights[k][j * layer.inputs..(j + 1) * layer.inputs]
                .iter_mut()
                .zip(z)
            {
                *g = d * zi;
            }
        }
    }
    grads.deltas = deltas;
    Ok(grads)
}

/// Mean gradient and summed loss over a batch of `(input, target)` pairs.
///
/// Samples are processed in parallel; every reduction runs over samples in
/// index order, so the result does not depend on the thread count.
pub(crate) fn batch_gradients(
    net: &NetworkParams,
    inputs: &[Vec<f64>],
    targets: &[&[f64]],
    loss: Loss,
) -> (Gradients, f64) {
    let n = inputs.len();
    let work: Vec<(ForwardPass, Vec<Vec<f64>>, f64)> = par::map_range(n, 4, |s| {
        let pass = net.forward_unchecked(&inputs[s]);
        let value = loss.value(&pass, targets[s]);
        let out = loss.output_delta(net, &pass, targets[s]);
        let deltas = layer_deltas(net, &pass, out);
        (pass, deltas, value)
    });
    let total_loss = work.iter().map(|w| w.2).sum();
    let scale = 1.0 / n as f64;

    let mut grads = Gradients::zeros_like(net);
    for (k, layer) in net.layers().iter().enumerate() {
        let cols = layer.inputs;
        let rows_per_task = (4096 / cols).max(1);
        par::for_each_chunk_mut(&mut grads.weights[k], rows_per_task * cols, |task, chunk| {
            let first_row = task * rows_per_task;
            for (r, row) in chunk.chunks_mut(cols).enumerate() {
                let j = first_row + r;
                for (pass, deltas, _) in &work {
                    let d = deltas[k][j];
                    if d != 0.0 {
                        for (g, &z) in row.iter_mut().zip(&pass.post[k]) {
                            *g += d * z;
                        }
                    }
                }
                row.iter_mut().for_each(|g| *g *= scale);
            }
        });
        for (j, b) in grads.biases[k].iter_mut().enumerate() {
            *b = work.iter().map(|w| w.1[k][j]).sum::<f64>() * scale;
        }
    }
    (grads, total_loss)
}
