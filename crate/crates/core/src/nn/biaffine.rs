use crate::autodiff::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::nn::init;
use crate::rng::RngStream;

/// Biaffine scorer `score(i ← j) = [r_dep_i; 1]ᵀ · W_k · r_head_j` for
/// `k` in `0..outputs` (one matrix for arcs, one per relation for labels).
#[derive(Clone, Debug)]
pub struct Biaffine {
    /// `(dep_dim + 1) × (outputs · head_dim)`; block `k` spans columns
    /// `k·head_dim .. (k+1)·head_dim`.
    pub weight: ParamId,
    pub dep_dim: usize,
    pub head_dim: usize,
    pub outputs: usize,
}

impl Biaffine {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dep_dim: usize,
        head_dim: usize,
        outputs: usize,
        rng: &mut RngStream,
    ) -> Self {
        let weight = store.add(
            format!("{}.weight", name),
            init::uniform(&[dep_dim + 1, outputs * head_dim], rng),
            true,
        );
        Biaffine {
            weight,
            dep_dim,
            head_dim,
            outputs,
        }
    }

    fn check(&self, g: &Graph, r_dep: NodeId, r_head: NodeId) -> Result<()> {
        let (sd, sh) = (g.shape(r_dep), g.shape(r_head));
        if sd.len() != 2 || sh.len() != 2 || sd[1] != self.dep_dim || sh[1] != self.head_dim {
            return Err(Error::Shape(format!(
                "biaffine expects dependents [n×{}] and heads [m×{}], got {:?} and {:?}",
                self.dep_dim, self.head_dim, sd, sh
            )));
        }
        Ok(())
    }

    /// `[r_dep; 1] · W`, shape `n × (outputs · head_dim)`.
    fn project_dependents(&self, g: &mut Graph, store: &ParamStore, r_dep: NodeId) -> Result<NodeId> {
        let n = g.shape(r_dep)[0];
        let ones = g.constant(Tensor::ones(&[n, 1]));
        let with_bias = g.concat(&[r_dep, ones])?;
        let w = g.param(store, self.weight);
        g.matmul(with_bias, w)
    }

    /// Arc scores `n × m` for dependents `r_dep[n×d]` and candidate heads
    /// `r_head[m×d']` (row 0 of `r_head` is the root).
    pub fn arc_scores(&self, g: &mut Graph, store: &ParamStore, r_dep: NodeId, r_head: NodeId) -> Result<NodeId> {
        self.check(g, r_dep, r_head)?;
        if self.outputs != 1 {
            return Err(Error::Shape("arc_scores on a multi-output biaffine".into()));
        }
        let projected = self.project_dependents(g, store, r_dep)?;
        let heads_t = g.transpose(r_head)?;
        g.matmul(projected, heads_t)
    }

    /// Per-output scores `n × outputs` where dependent `i` is paired with
    /// head row `heads[i]`.
    pub fn scores_at(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        r_dep: NodeId,
        r_head: NodeId,
        heads: &[usize],
    ) -> Result<NodeId> {
        self.check(g, r_dep, r_head)?;
        if heads.len() != g.shape(r_dep)[0] {
            return Err(Error::Shape(format!(
                "{} dependents but {} heads",
                g.shape(r_dep)[0],
                heads.len()
            )));
        }
        let projected = self.project_dependents(g, store, r_dep)?;
        let chosen = g.gather(r_head, heads)?;
        let mut columns = Vec::with_capacity(self.outputs);
        for k in 0..self.outputs {
            let block = g.slice_cols(projected, k * self.head_dim, self.head_dim)?;
            let prod = g.mul(block, chosen)?;
            columns.push(g.sum_axis(prod, 1)?);
        }
        g.concat(&columns)
    }

    /// All scores as a plain `n × m × outputs` tensor (no gradient).
    pub fn all_scores(&self, store: &ParamStore, r_dep: &Tensor, r_head: &Tensor) -> Result<Tensor> {
        let (n, m) = (r_dep.rows(), r_head.rows());
        if r_dep.cols() != self.dep_dim || r_head.cols() != self.head_dim {
            return Err(Error::Shape(format!(
                "biaffine expects dependents [n×{}] and heads [m×{}], got {:?} and {:?}",
                self.dep_dim,
                self.head_dim,
                r_dep.shape(),
                r_head.shape()
            )));
        }
        let mut with_bias = Vec::with_capacity(n * (self.dep_dim + 1));
        for i in 0..n {
            with_bias.extend_from_slice(r_dep.row_slice(i));
            with_bias.push(1.0);
        }
        let with_bias = Tensor::new(vec![n, self.dep_dim + 1], with_bias)?;
        let projected = with_bias.matmul(store.value(self.weight));
        let hd = self.head_dim;
        let mut out = vec![0.0; n * m * self.outputs];
        for i in 0..n {
            let prow = projected.row_slice(i);
            for j in 0..m {
                let hrow = r_head.row_slice(j);
                for k in 0..self.outputs {
                    out[(i * m + j) * self.outputs + k] =
                        prow[k * hd..(k + 1) * hd].iter().zip(hrow).map(|(a, b)| a * b).sum();
                }
            }
        }
        Tensor::new(vec![n, m, self.outputs], out)
    }
}
