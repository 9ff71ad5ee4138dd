use crate::autodiff::{dropout_mask, Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::Result;
use crate::nn::init;
use crate::rng::RngStream;

/// Leaky ReLU slope used throughout the decoders.
pub const LEAKY_SLOPE: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Linear,
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut RngStream) -> Self {
        let weight = store.add(format!("{}.weight", name), init::glorot(input, output, rng), true);
        let bias = store.add(format!("{}.bias", name), Tensor::zeros(&[1, output]), true);
        Linear {
            weight,
            bias,
            input,
            output,
        }
    }

    /// `x[n×input] · W + b`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

/// Chain of affine layers, each followed by its activation and, in training
/// mode, by dropout on its output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<(Linear, Activation)>,
    pub dropout: f64,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        spec: &[(usize, Activation)],
        dropout: f64,
        rng: &mut RngStream,
    ) -> Self {
        let mut layers = Vec::with_capacity(spec.len());
        let mut width = input;
        for (i, &(out, act)) in spec.iter().enumerate() {
            let lin = Linear::new(store, &format!("{}.{}", name, i), width, out, rng);
            layers.push((lin, act));
            width = out;
        }
        Mlp { layers, dropout }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|(l, _)| l.output).unwrap_or(0)
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        train: bool,
        rng: &mut RngStream,
    ) -> Result<NodeId> {
        let mut h = x;
        for (lin, act) in &self.layers {
            h = lin.forward(g, store, h)?;
            if let Activation::LeakyRelu(slope) = act {
                h = g.leaky_relu(h, *slope);
                // linear output layers produce scores and are never dropped
                if train && self.dropout > 0.0 {
                    let mask = dropout_mask(g.shape(h), self.dropout, rng)?;
                    let m = g.constant(mask);
                    h = g.mul(h, m)?;
                }
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(store: &mut ParamStore, id: ParamId, t: Tensor) {
        *store.value_mut(id) = t;
    }

    #[test]
    fn identity_linear_layer_passes_input() {
        let mut store = ParamStore::new();
        let mut rng = RngStream::new(0);
        let mlp = Mlp::new(&mut store, "m", 2, &[(2, Activation::Linear)], 0.0, &mut rng);
        set(&mut store, mlp.layers[0].0.weight, Tensor::matrix(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(&[&[3.0, -4.0]]));
        let y = mlp.forward(&mut g, &store, x, false, &mut rng).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, -4.0]);
    }

    #[test]
    fn zero_weights_broadcast_bias() {
        let mut store = ParamStore::new();
        let mut rng = RngStream::new(0);
        let mlp = Mlp::new(&mut store, "m", 3, &[(2, Activation::Linear)], 0.0, &mut rng);
        set(&mut store, mlp.layers[0].0.weight, Tensor::zeros(&[3, 2]));
        set(&mut store, mlp.layers[0].0.bias, Tensor::row(vec![0.5, -1.5]));
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]));
        let y = mlp.forward(&mut g, &store, x, false, &mut rng).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -1.5, 0.5, -1.5]);
    }

    #[test]
    fn two_layer_leaky_by_hand() {
        // h1 = leaky(w1·x + b1) with x = -1, w1 = 2, b1 = 0.5 -> -1.5 -> -0.15
        // y  = w2·h1 + b2 with w2 = 3, b2 = 1 -> 0.55
        let mut store = ParamStore::new();
        let mut rng = RngStream::new(0);
        let spec = [(1, Activation::LeakyRelu(LEAKY_SLOPE)), (1, Activation::Linear)];
        let mlp = Mlp::new(&mut store, "m", 1, &spec, 0.0, &mut rng);
        set(&mut store, mlp.layers[0].0.weight, Tensor::matrix(&[&[2.0]]));
        set(&mut store, mlp.layers[0].0.bias, Tensor::row(vec![0.5]));
        set(&mut store, mlp.layers[1].0.weight, Tensor::matrix(&[&[3.0]]));
        set(&mut store, mlp.layers[1].0.bias, Tensor::row(vec![1.0]));
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(&[&[-1.0]]));
        let y = mlp.forward(&mut g, &store, x, false, &mut rng).unwrap();
        assert!((g.value(y).item() - 0.55).abs() < 1e-12);
    }
}
