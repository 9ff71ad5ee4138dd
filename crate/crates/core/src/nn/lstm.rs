use std::collections::BTreeMap;

use crate::autodiff::{dropout_mask, Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::nn::init;
use crate::rng::RngStream;

/// Unidirectional LSTM with gate order (input, forget, cell, output).
#[derive(Clone, Debug)]
pub struct Lstm {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let w_input = store.add(
            format!("{}.w_input", name),
            init::glorot(input, 4 * hidden, rng),
            true,
        );
        let w_hidden = store.add(
            format!("{}.w_hidden", name),
            init::orthogonal_blocks(hidden, 4, rng),
            true,
        );
        let bias = store.add(format!("{}.bias", name), Tensor::zeros(&[1, 4 * hidden]), true);
        Lstm {
            w_input,
            w_hidden,
            bias,
            input,
            hidden,
        }
    }

    pub fn params(&self) -> [ParamId; 3] {
        [self.w_input, self.w_hidden, self.bias]
    }

    /// One recurrence step. `xw` holds the already-projected input
    /// (`B × 4h`, bias included); the previous state is `None` at t = 0.
    fn step(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        xw: NodeId,
        prev: Option<(NodeId, NodeId)>,
        hidden_mask: Option<NodeId>,
    ) -> Result<(NodeId, NodeId)> {
        let h = self.hidden;
        let pre = match prev {
            Some((h_prev, _)) => {
                let h_in = match hidden_mask {
                    Some(m) => g.mul(h_prev, m)?,
                    None => h_prev,
                };
                let wh = g.param(store, self.w_hidden);
                let rec = g.matmul(h_in, wh)?;
                g.add(xw, rec)?
            }
            None => xw,
        };
        let i = g.slice_cols(pre, 0, h)?;
        let i = g.sigmoid(i);
        let f = g.slice_cols(pre, h, h)?;
        let f = g.sigmoid(f);
        let c_hat = g.slice_cols(pre, 2 * h, h)?;
        let c_hat = g.tanh(c_hat);
        let o = g.slice_cols(pre, 3 * h, h)?;
        let o = g.sigmoid(o);
        let ic = g.mul(i, c_hat)?;
        let c = match prev {
            Some((_, c_prev)) => {
                let fc = g.mul(f, c_prev)?;
                g.add(fc, ic)?
            }
            None => ic,
        };
        let tc = g.tanh(c);
        let h_new = g.mul(o, tc)?;
        Ok((h_new, c))
    }

    /// Runs over the rows of `x[n×input]`, right to left when `reverse`.
    /// Returns the `n×h` hidden states in position order and the final
    /// state (last position processed).
    pub fn run_sequence(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        reverse: bool,
        masks: Option<&DirectionMasks>,
    ) -> Result<(NodeId, NodeId)> {
        let n = g.shape(x)[0];
        let x = match masks {
            Some(m) => {
                let full = g.constant(m.input_matrix(n));
                g.mul(x, full)?
            }
            None => x,
        };
        let wx = g.param(store, self.w_input);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, wx)?;
        let xw = g.add_row(xw, b)?;
        let hidden_mask = masks.map(|m| g.constant(m.hidden.clone()));

        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        let mut states = vec![None; n];
        let mut prev = None;
        for &t in &order {
            let xw_t = g.slice_rows(xw, t, 1)?;
            let (h, c) = self.step(g, store, xw_t, prev, hidden_mask)?;
            states[t] = Some(h);
            prev = Some((h, c));
        }
        let states: Vec<NodeId> = states.into_iter().map(Option::unwrap).collect();
        let out = g.stack_rows(&states)?;
        Ok((out, prev.unwrap().0))
    }

    /// Runs a batch of equal-length sequences in lockstep. `steps[t]` is the
    /// `B × input` input at time t; returns the `B × h` final state.
    pub fn run_batch_final(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        steps: &[NodeId],
        reverse: bool,
    ) -> Result<NodeId> {
        let wx = g.param(store, self.w_input);
        let b = g.param(store, self.bias);
        let mut prev = None;
        let order: Vec<usize> = if reverse {
            (0..steps.len()).rev().collect()
        } else {
            (0..steps.len()).collect()
        };
        for t in order {
            let xw = g.matmul(steps[t], wx)?;
            let xw = g.add_row(xw, b)?;
            prev = Some(self.step(g, store, xw, prev, None)?);
        }
        prev.map(|(h, _)| h)
            .ok_or_else(|| Error::Validation("LSTM over an empty sequence".into()))
    }
}

/// Dropout masks for one direction of one layer over one sequence. The same
/// masks are applied at every time step.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionMasks {
    /// `1 × input`
    pub input: Tensor,
    /// `1 × hidden`
    pub hidden: Tensor,
}

impl DirectionMasks {
    pub fn sample(input: usize, hidden: usize, input_rate: f64, hidden_rate: f64, rng: &mut RngStream) -> Result<Self> {
        Ok(DirectionMasks {
            input: dropout_mask(&[1, input], input_rate, rng)?,
            hidden: dropout_mask(&[1, hidden], hidden_rate, rng)?,
        })
    }

    pub fn ones(input: usize, hidden: usize) -> Self {
        DirectionMasks {
            input: Tensor::ones(&[1, input]),
            hidden: Tensor::ones(&[1, hidden]),
        }
    }

    /// The input mask repeated over `n` time steps.
    pub fn input_matrix(&self, n: usize) -> Tensor {
        let row = self.input.data();
        let data = (0..n).flat_map(|_| row.iter().copied()).collect();
        Tensor::new(vec![n, row.len()], data).unwrap()
    }
}

/// Stack of bidirectional LSTM layers with variational (shared-mask)
/// dropout.
#[derive(Clone, Debug)]
pub struct BiLstmStack {
    pub layers: Vec<[Lstm; 2]>,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
}

impl BiLstmStack {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        input_dropout: f64,
        hidden_dropout: f64,
        rng: &mut RngStream,
    ) -> Self {
        let mut layers = Vec::with_capacity(num_layers);
        let mut width = input;
        for l in 0..num_layers {
            let fwd = Lstm::new(store, &format!("{}.l{}.fwd", name, l), width, hidden, rng);
            let bwd = Lstm::new(store, &format!("{}.l{}.bwd", name, l), width, hidden, rng);
            layers.push([fwd, bwd]);
            width = 2 * hidden;
        }
        BiLstmStack {
            layers,
            input_dropout,
            hidden_dropout,
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers[0][0].hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0][0].input
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers
            .iter()
            .flat_map(|pair| pair.iter().flat_map(|l| l.params()))
            .collect()
    }

    /// One mask pair per (layer, direction); all-ones outside training.
    pub fn sample_masks(&self, train: bool, rng: &mut RngStream) -> Result<Vec<[DirectionMasks; 2]>> {
        self.layers
            .iter()
            .map(|pair| {
                let mut make = |l: &Lstm| {
                    if train {
                        DirectionMasks::sample(l.input, l.hidden, self.input_dropout, self.hidden_dropout, rng)
                    } else {
                        Ok(DirectionMasks::ones(l.input, l.hidden))
                    }
                };
                Ok([make(&pair[0])?, make(&pair[1])?])
            })
            .collect()
    }

    /// Top-layer outputs `n × 2h` for inputs `n × d`.
    pub fn run(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        train: bool,
        rng: &mut RngStream,
    ) -> Result<NodeId> {
        let masks = self.sample_masks(train, rng)?;
        self.run_with_masks(g, store, x, &masks, train)
    }

    pub fn run_with_masks(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: NodeId,
        masks: &[[DirectionMasks; 2]],
        train: bool,
    ) -> Result<NodeId> {
        if g.shape(x)[0] == 0 {
            return Err(Error::Validation("BiLSTM over an empty sequence".into()));
        }
        let mut h = x;
        for (pair, m) in self.layers.iter().zip(masks) {
            let (mf, mb) = if train { (Some(&m[0]), Some(&m[1])) } else { (None, None) };
            let (fwd, _) = pair[0].run_sequence(g, store, h, false, mf)?;
            let (bwd, _) = pair[1].run_sequence(g, store, h, true, mb)?;
            h = g.concat(&[fwd, bwd])?;
        }
        Ok(h)
    }
}

/// Character-level BiLSTM word encoder: the final forward and backward
/// states are concatenated.
#[derive(Clone, Debug)]
pub struct CharEncoder {
    pub table: ParamId,
    pub forward: Lstm,
    pub backward: Lstm,
    pub char_dim: usize,
}

impl CharEncoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        num_chars: usize,
        char_dim: usize,
        output_dim: usize,
        rng: &mut RngStream,
    ) -> Self {
        assert!(output_dim % 2 == 0, "character encoder output must be even");
        let table = store.add(
            format!("{}.table", name),
            init::uniform(&[num_chars, char_dim], rng),
            true,
        );
        let forward = Lstm::new(store, &format!("{}.fwd", name), char_dim, output_dim / 2, rng);
        let backward = Lstm::new(store, &format!("{}.bwd", name), char_dim, output_dim / 2, rng);
        CharEncoder {
            table,
            forward,
            backward,
            char_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.table];
        p.extend(self.forward.params());
        p.extend(self.backward.params());
        p
    }

    /// Encodes one word, returning a `1 × output_dim` row.
    pub fn encode_chars(&self, g: &mut Graph, store: &ParamStore, chars: &[usize]) -> Result<NodeId> {
        self.encode_words(g, store, &[chars])
    }

    /// Encodes many words, returning one row per word in input order.
    /// Identical character sequences are encoded once and words of equal
    /// length are run in lockstep.
    pub fn encode_words(&self, g: &mut Graph, store: &ParamStore, words: &[&[usize]]) -> Result<NodeId> {
        if words.iter().any(|w| w.is_empty()) {
            return Err(Error::Validation("word with no characters".into()));
        }
        let mut distinct: BTreeMap<(usize, &[usize]), usize> = BTreeMap::new();
        let mut slot_of = Vec::with_capacity(words.len());
        for w in words {
            let next = distinct.len();
            slot_of.push(*distinct.entry((w.len(), *w)).or_insert(next));
        }
        // group distinct words by length
        let mut by_len: BTreeMap<usize, Vec<(&[usize], usize)>> = BTreeMap::new();
        for (&(len, w), &slot) in &distinct {
            by_len.entry(len).or_default().push((w, slot));
        }
        let table = g.param(store, self.table);
        let mut rows = Vec::new();
        let mut row_of_slot = vec![0; distinct.len()];
        let mut offset = 0;
        for (len, group) in by_len {
            let steps: Vec<NodeId> = (0..len)
                .map(|t| {
                    let ids: Vec<usize> = group.iter().map(|(w, _)| w[t]).collect();
                    g.gather(table, &ids)
                })
                .collect::<Result<_>>()?;
            let f = self.forward.run_batch_final(g, store, &steps, false)?;
            let b = self.backward.run_batch_final(g, store, &steps, true)?;
            rows.push(g.concat(&[f, b])?);
            for (k, &(_, slot)) in group.iter().enumerate() {
                row_of_slot[slot] = offset + k;
            }
            offset += group.len();
        }
        let all = g.stack_rows(&rows)?;
        let order: Vec<usize> = slot_of.iter().map(|&s| row_of_slot[s]).collect();
        g.gather(all, &order)
    }
}
