//! Tape-based reverse-mode automatic differentiation over dense `f64`
//! tensors, restricted to the operations the tagging and parsing networks
//! use.

mod graph;
mod params;
mod tensor;

pub use graph::{Graph, NodeId, Reduction};
pub(crate) use graph::softmax_values;
pub use params::{Param, ParamId, ParamStore};
pub use tensor::Tensor;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Inverted-dropout mask: each entry is `0` with probability `rate` and
/// `1 / (1 - rate)` otherwise.
pub fn dropout_mask(shape: &[usize], rate: f64, rng: &mut RngStream) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "dropout rate must lie in [0, 1), got {}",
            rate
        )));
    }
    if rate == 0.0 {
        return Ok(Tensor::ones(shape));
    }
    let keep = 1.0 / (1.0 - rate);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

/// Elementwise softmax of a plain tensor along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if x.data().iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("softmax input contains NaN".into()));
    }
    softmax_values(x, axis)
}

#[cfg(test)]
mod tests;
