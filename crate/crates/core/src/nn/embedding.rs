use crate::autodiff::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::nn::init;
use crate::rng::RngStream;

/// Word embedding as the sum of a fixed pretrained table and a trainable
/// table that starts at zero.
#[derive(Clone, Debug)]
pub struct WordEmbedding {
    /// `|V_pre| × d`, never updated.
    pub pretrained: Option<ParamId>,
    /// `|V| × d`, zero at construction.
    pub trainable: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl WordEmbedding {
    pub fn new(store: &mut ParamStore, name: &str, vocab_size: usize, dim: usize, pretrained: Option<Tensor>) -> Result<Self> {
        let pretrained = match pretrained {
            Some(t) => {
                if t.rank() != 2 || t.cols() != dim {
                    return Err(Error::Shape(format!(
                        "pretrained table {:?} does not match word dimension {}",
                        t.shape(),
                        dim
                    )));
                }
                Some(store.add(format!("{}.pretrained", name), t, false))
            }
            None => None,
        };
        let trainable = store.add(format!("{}.trainable", name), Tensor::zeros(&[vocab_size, dim]), true);
        Ok(WordEmbedding {
            pretrained,
            trainable,
            vocab_size,
            dim,
        })
    }

    /// Embeds `words` (vocabulary ids) given each token's pretrained row, if
    /// any. Tokens without a pretrained row get a zero pretrained part.
    pub fn embed(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        words: &[usize],
        pretrained_rows: &[Option<usize>],
    ) -> Result<NodeId> {
        if words.len() != pretrained_rows.len() {
            return Err(Error::Shape(format!(
                "{} word ids but {} pretrained rows",
                words.len(),
                pretrained_rows.len()
            )));
        }
        let table = g.param(store, self.trainable);
        let trained = g.gather(table, words)?;
        let pre = match self.pretrained {
            Some(pid) => store.value(pid),
            None => return Ok(trained),
        };
        let mut fixed = Tensor::zeros(&[words.len(), self.dim]);
        for (r, row) in pretrained_rows.iter().enumerate() {
            if let Some(row) = row {
                if *row >= pre.rows() {
                    return Err(Error::Index(format!(
                        "pretrained row {} outside table of {} rows",
                        row,
                        pre.rows()
                    )));
                }
                fixed.data_mut()[r * self.dim..(r + 1) * self.dim].copy_from_slice(pre.row_slice(*row));
            }
        }
        let fixed = g.constant(fixed);
        g.add(trained, fixed)
    }

    /// Single-token form of [`WordEmbedding::embed`].
    pub fn embed_word(&self, g: &mut Graph, store: &ParamStore, word: usize, pretrained_row: Option<usize>) -> Result<NodeId> {
        self.embed(g, store, &[word], &[pretrained_row])
    }
}

/// Plain trainable lookup table (characters, tags).
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, size: usize, dim: usize, rng: &mut RngStream) -> Self {
        let table = store.add(name.to_string(), init::uniform(&[size, dim], rng), true);
        Embedding { table, dim }
    }

    pub fn lookup(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<NodeId> {
        let t = g.param(store, self.table);
        g.gather(t, ids)
    }
}

/// Drops each input component of each token independently: component `k`
/// of token `i` is zeroed with probability `rate` and rescaled by
/// `1 / (1 - rate)` otherwise.
pub fn component_dropout(g: &mut Graph, parts: &[NodeId], rate: f64, rng: &mut RngStream) -> Result<Vec<NodeId>> {
    if rate == 0.0 {
        return Ok(parts.to_vec());
    }
    let keep = 1.0 / (1.0 - rate);
    parts
        .iter()
        .map(|&p| {
            let shape = g.shape(p).to_vec();
            let (n, d) = (shape[0], shape[1]);
            let mut mask = Vec::with_capacity(n * d);
            for _ in 0..n {
                let v = if rng.bernoulli(rate) { 0.0 } else { keep };
                mask.extend(std::iter::repeat(v).take(d));
            }
            let m = g.constant(Tensor::new(shape, mask)?);
            g.mul(p, m)
        })
        .collect()
}
