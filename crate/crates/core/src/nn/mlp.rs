use rand::Rng;

use crate::error::{Error, Result};

/// Fully connected layer, `out = W x + b` with `W` stored row-major as
/// `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)
        }));
    }
}

/// Multilayer perceptron with rectified-linear hidden layers and a linear
/// output layer. One output per action.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-parameter gradients, shaped exactly like the network they belong to.
pub type Gradients = Mlp;

impl Mlp {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "invalid layer sizes {layer_sizes:?}"
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(Mlp { layers })
    }

    /// Uniform fan-in/fan-out scaled weights, zero biases.
    pub fn random<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(layer_sizes)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.inputs * layer.outputs || layer.biases.len() != layer.outputs {
                return Err(Error::DimensionMismatch {
                    what: "layer parameters",
                    expected: layer.inputs * layer.outputs,
                    got: layer.weights.len(),
                });
            }
            if i > 0 && layers[i - 1].outputs != layer.inputs {
                return Err(Error::DimensionMismatch {
                    what: "layer chaining",
                    expected: layers[i - 1].outputs,
                    got: layer.inputs,
                });
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters in a fixed order: per layer, weights then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    fn check_input(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "observation",
                expected: self.input_dim(),
                got: obs.len(),
            });
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        Ok(())
    }

    /// Q-values for every action.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_input(obs)?;
        Ok(self.forward_cached(obs).pop().expect("at least one layer"))
    }

    /// Post-activation values for every layer, output last.
    fn forward_cached(&self, obs: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { obs } else { &activations[i - 1] };
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(input, &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        activations
    }

    /// Gradient of `(target - Q(obs, action))^2` with respect to every
    /// parameter. Only the selected output unit carries error.
    pub fn backward(&self, obs: &[f64], action: usize, target: f64) -> Result<Gradients> {
        let mut grads = self.zeros_like();
        self.accumulate_gradient(obs, action, target, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale * d/dtheta (target - Q)^2` into `grads` and returns the
    /// pre-update `Q(obs, action)`.
    pub fn accumulate_gradient(
        &self,
        obs: &[f64],
        action: usize,
        target: f64,
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(obs)?;
        if !target.is_finite() {
            return Err(Error::NonFinite("regression target"));
        }
        if action >= self.output_dim() {
            return Err(Error::ActionOutOfRange {
                index: action,
                len: self.output_dim(),
            });
        }
        if !self.same_shape(grads) {
            return Err(Error::DimensionMismatch {
                what: "gradient buffer layers",
                expected: self.layers.len(),
                got: grads.layers.len(),
            });
        }
        let activations = self.forward_cached(obs);
        let q = activations[self.layers.len() - 1][action];

        // Error signal at the output layer: only the chosen action.
        let mut delta = vec![0.0; self.output_dim()];
        delta[action] = scale * 2.0 * (q - target);

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = if i == 0 { obs } else { &activations[i - 1] };
            let grad = &mut grads.layers[i];
            for (o, &dz) in delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                grad.biases[o] += dz;
                let row = &mut grad.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += dz * x;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &dz) in delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += dz * w;
                }
            }
            // ReLU derivative, taken as 0 at the kink.
            for (p, a) in prev.iter_mut().zip(&activations[i - 1]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(q)
    }
}
