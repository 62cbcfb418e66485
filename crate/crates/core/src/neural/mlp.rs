use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Affine map stored row-major: `weights[o * inputs + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

/// Multilayer perceptron with tanh hidden units and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradients, shaped like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Layer>,
}

/// Activations kept for the backward pass: the input followed by the
/// output of every layer.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Vec<f64>,
    pub cache: ForwardCache,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::ContractViolation(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = limit * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::params)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Forward> {
        if input.len() != self.input_dim() {
            return Err(Error::ContractViolation(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let x = &activations[k];
            let mut y = layer.bias.clone();
            for (o, out) in y.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                *out += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                if k < last {
                    *out = out.tanh();
                }
            }
            activations.push(y);
        }
        let output = activations[activations.len() - 1].clone();
        Ok(Forward {
            output,
            cache: ForwardCache { activations },
        })
    }

    /// Output only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output)
    }

    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Grads> {
        let mut grads = Grads::zeros_like(self);
        self.backward_into(cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// Adds the gradient of the loss whose derivative with respect to the
    /// network output is `output_grad` into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut Grads) -> Result<()> {
        let acts = &cache.activations;
        let shapes_match = acts.len() == self.layers.len() + 1
            && self
                .layers
                .iter()
                .enumerate()
                .all(|(k, l)| acts[k].len() == l.inputs && acts[k + 1].len() == l.outputs);
        if !shapes_match || output_grad.len() != self.output_dim() || !grads.matches(self) {
            return Err(Error::ContractViolation(
                "cache or gradient does not match network".into(),
            ));
        }
        let mut delta = output_grad.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let x = &acts[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, v) in row.iter_mut().zip(x) {
                    *gw += d * v;
                }
            }
            if k == 0 {
                break;
            }
            // x is the tanh output of the previous layer
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, a) in prev.iter_mut().zip(x) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
        Ok(())
    }
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn matches(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.inputs == l.inputs && g.outputs == l.outputs)
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::params)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    pub fn fill_zero(&mut self) {
        self.values_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn global_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let sizes = [11, 64, 64, 6];
        let a = Mlp::init(&sizes, 3).unwrap();
        assert_eq!(a, Mlp::init(&sizes, 3).unwrap());
        assert_ne!(a, Mlp::init(&sizes, 4).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0f64 / (11.0 + 64.0)).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() < limit));
        assert_eq!(a.sizes(), sizes);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[11, 64, 64, 6]).unwrap();
        assert_eq!(net.predict(&[0.3; 11]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn output_bias_passes_through() {
        let mut net = Mlp::zeros(&[3, 4, 2]).unwrap();
        net.layers[1].bias = vec![0.25, -1.5];
        assert_eq!(net.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn single_tanh_unit() {
        let mut net = Mlp::zeros(&[1, 1, 1]).unwrap();
        net.layers[0].weights[0] = 1.0;
        net.layers[1].weights[0] = 1.0;
        let fwd = net.forward(&[0.5]).unwrap();
        assert!((fwd.output[0] - 0.46211715726000974).abs() < 1e-12);
    }

    #[test]
    fn wrong_input_dimension() {
        let net = Mlp::zeros(&[11, 4, 6]).unwrap();
        assert!(matches!(net.forward(&[0.0; 10]), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let net = Mlp::init(&[5, 7, 3], 1).unwrap();
        let fwd = net.forward(&[0.1, -0.2, 0.3, 0.0, 1.0]).unwrap();
        let g = net.backward(&fwd.cache, &[0.0; 3]).unwrap();
        assert!(g.values().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_gradient() {
        // single affine layer y = w x: dy/dw = x
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.layers[0].weights[0] = 0.7;
        let fwd = net.forward(&[2.0]).unwrap();
        let g = net.backward(&fwd.cache, &[1.0]).unwrap();
        assert_eq!(g.layers[0].weights[0], 2.0);
        assert_eq!(g.layers[0].bias[0], 1.0);
    }

    #[test]
    fn mismatched_cache_rejected() {
        let a = Mlp::init(&[3, 4, 2], 1).unwrap();
        let b = Mlp::init(&[3, 5, 2], 1).unwrap();
        let fwd = a.forward(&[0.0; 3]).unwrap();
        assert!(matches!(
            b.backward(&fwd.cache, &[1.0, 1.0]),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn clip_global_norm() {
        let net = Mlp::zeros(&[1, 2]).unwrap();
        let mut g = Grads::zeros_like(&net);
        g.layers[0].weights = vec![3.0, 4.0];
        assert_eq!(g.clip_global_norm(1.0), 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
    }
}
