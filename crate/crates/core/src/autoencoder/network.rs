use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Rectifier,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Rectifier => a.max(0.0),
            Activation::Logistic => logistic(a),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `z`.
    /// The rectifier derivative at exactly zero is zero.
    #[inline]
    pub fn derivative(self, a: f64, z: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => z * (1.0 - z),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Rectifier => 0,
            Activation::Logistic => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Rectifier),
            1 => Ok(Activation::Logistic),
            t => Err(Error::Format(format!("unknown activation tag {t}"))),
        }
    }
}

#[inline]
pub fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// One fully connected layer. `weights` is `outputs x inputs`, row-major, so
/// row `j` holds the incoming weights of output unit `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }

    #[inline]
    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[output * self.inputs + input]
    }

    /// Writes pre-activations into `pre` and activations into `post`.
    pub(crate) fn forward_into(&self, z: &[f64], pre: &mut [f64], post: &mut [f64]) {
        for j in 0..self.outputs {
            let a = self.bias[j] + dot(self.row(j), z);
            pre[j] = a;
            post[j] = self.activation.apply(a);
        }
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs {
            return Err(Error::ShapeMismatch {
                context: "layer weights",
                expected: self.inputs * self.outputs,
                found: self.weights.len(),
            });
        }
        if self.bias.len() != self.outputs {
            return Err(Error::ShapeMismatch {
                context: "layer bias",
                expected: self.outputs,
                found: self.bias.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Layered feedforward autoencoder parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

/// Activations recorded by [`NetworkParams::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Pre-activations `a` of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Layer outputs; `post[0]` is the input and the last entry is `r(x)`.
    pub post: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn reconstruction(&self) -> &[f64] {
        self.post.last().expect("forward pass has an output")
    }
}

impl NetworkParams {
    /// Default layout: `[V, 500, 500, 20, 500, 500, V]`.
    pub fn default_dims(input: usize) -> Vec<usize> {
        vec![input, 500, 500, 20, 500, 500, input]
    }

    /// Mirrors an encoder half, e.g. `[V, 500, 20]` into `[V, 500, 20, 500, V]`.
    pub fn mirrored_dims(encoder: &[usize]) -> Vec<usize> {
        let mut dims = encoder.to_vec();
        dims.extend(encoder.iter().rev().skip(1));
        dims
    }

    /// Random initialization: weights ~ N(0, 1/fan_in), zero biases. The
    /// bottleneck and output layers are logistic, the rest rectifiers.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 3 {
            return Err(Error::invalid(format!(
                "a network needs at least 3 layer dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        let code = bottleneck_position(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let activation = if k + 1 == code || k + 2 == dims.len() {
                    Activation::Logistic
                } else {
                    Activation::Rectifier
                };
                let mut layer = Layer::zeros(w[0], w[1], activation);
                let normal = Normal::new(0.0, 1.0 / (w[0] as f64).sqrt()).expect("valid scale");
                for x in layer.weights.iter_mut() {
                    *x = normal.sample(&mut rng);
                }
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::invalid("a network needs at least two layers"));
        }
        for l in &layers {
            l.check()?;
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::invalid("layer dimensions must be positive"));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::ShapeMismatch {
                    context: "consecutive layers",
                    expected: w[0].outputs,
                    found: w[1].inputs,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    /// Index into `dims()` of the code layer (narrowest interior layer).
    pub fn bottleneck(&self) -> usize {
        bottleneck_position(&self.dims())
    }

    pub fn code_width(&self) -> usize {
        self.dims()[self.bottleneck()]
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                context: "network input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Runs the first `depth` layers.
    fn run(&self, x: &[f64], depth: usize) -> ForwardPass {
        let mut pre = Vec::with_capacity(depth);
        let mut post = Vec::with_capacity(depth + 1);
        post.push(x.to_vec());
        for layer in &self.layers[..depth] {
            let mut a = vec![0.0; layer.outputs];
            let mut z = vec![0.0; layer.outputs];
            layer.forward_into(post.last().expect("input present"), &mut a, &mut z);
            pre.push(a);
            post.push(z);
        }
        ForwardPass { pre, post }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        self.check_input(x)?;
        Ok(self.run(x, self.layers.len()))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> ForwardPass {
        self.run(x, self.layers.len())
    }

    /// Bottleneck activations: the code-layer prefix of [`forward`](Self::forward).
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let depth = self.bottleneck();
        Ok(self.run(x, depth).post.pop().expect("code layer"))
    }

    /// The reconstruction `r(x)`.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.post.pop().expect("output layer"))
    }
}

fn bottleneck_position(dims: &[usize]) -> usize {
    let interior = &dims[1..dims.len() - 1];
    let min = *interior.iter().min().expect("interior layer");
    1 + interior.iter().position(|&d| d == min).expect("minimum present")
}
