use crate::autodiff::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Attempts at sampling a layer-dropout pattern that keeps at least one
/// layer before falling back to no dropout for the call.
pub const LAYER_DROPOUT_RETRIES: usize = 8;

/// Scalar mix `γ · Σ_j softmax(s)_j · h_j` over externally supplied
/// contextual layers, with trainable per-task `γ` and `s`.
#[derive(Clone, Debug)]
pub struct LayerAttention {
    /// `1 × L` mixing logits, zero at construction (uniform mixture).
    pub weights: ParamId,
    /// `[1]`, one at construction.
    pub gamma: ParamId,
    pub num_layers: usize,
    pub layer_dropout: f64,
}

#[derive(Copy, Clone, Debug)]
pub struct MixOutput {
    /// `n × d`
    pub output: NodeId,
    /// `1 × L` softmax weights actually used.
    pub weights: NodeId,
}

impl LayerAttention {
    pub fn new(store: &mut ParamStore, name: &str, num_layers: usize, layer_dropout: f64) -> Self {
        let weights = store.add(format!("{}.weights", name), Tensor::zeros(&[1, num_layers]), true);
        let gamma = store.add(format!("{}.gamma", name), Tensor::scalar(1.0), true);
        LayerAttention {
            weights,
            gamma,
            num_layers,
            layer_dropout,
        }
    }

    /// Samples which layers to drop. Never drops all of them: after
    /// [`LAYER_DROPOUT_RETRIES`] all-dropped draws nothing is dropped.
    pub fn sample_drops(&self, rng: &mut RngStream) -> Vec<bool> {
        for _ in 0..LAYER_DROPOUT_RETRIES {
            let drops: Vec<bool> = (0..self.num_layers).map(|_| rng.bernoulli(self.layer_dropout)).collect();
            if drops.iter().any(|d| !d) {
                return drops;
            }
        }
        vec![false; self.num_layers]
    }

    /// Mixes `layers` (`L × n × d`) into an `n × d` representation.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        layers: &Tensor,
        train: bool,
        rng: &mut RngStream,
    ) -> Result<MixOutput> {
        let shape = layers.shape();
        if shape.len() != 3 || shape[0] != self.num_layers {
            return Err(Error::Shape(format!(
                "layer attention over {} layers got tensor {:?}",
                self.num_layers, shape
            )));
        }
        let (n, d) = (shape[1], shape[2]);
        let s = g.param(store, self.weights);
        let logits = if train && self.layer_dropout > 0.0 {
            let drops = self.sample_drops(rng);
            let mask = drops.iter().map(|&d| if d { f64::NEG_INFINITY } else { 0.0 }).collect();
            let m = g.constant(Tensor::row(mask));
            g.add(s, m)?
        } else {
            s
        };
        let weights = g.softmax(logits, 1)?;
        let flat = g.constant(layers.clone().reshaped(vec![self.num_layers, n * d])?);
        let mixed = g.matmul(weights, flat)?;
        let mixed = g.reshape(mixed, &[n, d])?;
        let gamma = g.param(store, self.gamma);
        let output = g.scale(mixed, gamma)?;
        Ok(MixOutput { output, weights })
    }
}

/// Replaces each id by `mask_id` with probability `rate`.
pub fn token_dropout(ids: &[usize], rate: f64, mask_id: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "token dropout rate must lie in [0, 1), got {}",
            rate
        )));
    }
    if rate == 0.0 {
        return Ok(ids.to_vec());
    }
    Ok(ids
        .iter()
        .map(|&id| if rng.bernoulli(rate) { mask_id } else { id })
        .collect())
}
