//! Tag and tree decoding from model scores.

mod mst;

use std::fmt;
use std::str::FromStr;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub use mst::decode_tree_mst;

/// How heads are chosen from an arc-score matrix.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum DecodeMode {
    #[default]
    Mst,
    Greedy,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mst" => Ok(DecodeMode::Mst),
            "greedy" => Ok(DecodeMode::Greedy),
            other => Err(Error::Config(format!(
                "unknown decode mode {:?} (expected mst or greedy)",
                other
            ))),
        }
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Mst => "mst",
            DecodeMode::Greedy => "greedy",
        })
    }
}

/// Decoded output for one sentence. Heads and labels are indexed by
/// dependent (token 1 at position 0).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseResult {
    pub tags: Option<Vec<usize>>,
    pub hetero_tags: Option<Vec<usize>>,
    pub heads: Option<Vec<usize>>,
    pub labels: Option<Vec<usize>>,
    /// The n×(n+1) arc-score matrix the heads were decoded from.
    pub arc_scores: Option<Tensor>,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise argmax; ties go to the lowest tag id.
pub fn decode_tags(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows()).map(|i| argmax(logits.row_slice(i))).collect()
}

/// Per-dependent argmax over candidate heads. The result may contain
/// cycles or several root children.
pub fn decode_tree_greedy(scores: &Tensor) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row_slice(i);
            let mut best = None;
            for (j, &v) in row.iter().enumerate() {
                if j == i + 1 {
                    continue;
                }
                if best.is_none_or(|b: usize| v > row[b]) {
                    best = Some(j);
                }
            }
            best.unwrap_or(0)
        })
        .collect()
}

/// Sum of the arc scores selected by `heads`.
pub fn tree_score(scores: &Tensor, heads: &[usize]) -> f64 {
    heads.iter().enumerate().map(|(i, &h)| scores.at(i, h)).sum()
}

/// Picks, for each dependent, the best label at its chosen head.
/// `label_scores` has shape `[n, n+1, L]`.
pub fn assign_labels(label_scores: &Tensor, heads: &[usize]) -> Result<Vec<usize>> {
    let shape = label_scores.shape();
    if shape.len() != 3 || shape[0] != heads.len() || shape[1] != heads.len() + 1 {
        return Err(Error::Shape(format!(
            "label scores {:?} do not match {} heads",
            shape,
            heads.len()
        )));
    }
    let l = shape[2];
    let data = label_scores.data();
    heads
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            if h > heads.len() {
                return Err(Error::Index(format!("head {} out of range", h)));
            }
            let start = (i * shape[1] + h) * l;
            Ok(argmax(&data[start..start + l]))
        })
        .collect()
}

#[cfg(test)]
mod tests;
