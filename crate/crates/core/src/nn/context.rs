//! Binary file of per-token contextual layer vectors produced by an external
//! encoder.
//!
//! Layout (little-endian): magic `CTXL`, version `u16`, layer count `u16`,
//! dimension `u32`, then one record per token: sentence index `u32`, token
//! index `u32` (0-based, root excluded), and `L × d` `f32` values in layer
//! order. Subword pooling (averaging the pieces of a word) is the exporter's
//! job.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CTXL";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ContextLayers {
    pub num_layers: usize,
    pub dim: usize,
    /// One `L × n × d` tensor per sentence.
    pub sentences: Vec<Tensor>,
}

impl ContextLayers {
    /// Loads the file and checks it covers exactly `sentence_lengths`.
    pub fn load(path: &Path, sentence_lengths: &[usize]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |msg: String| Error::parse(path, 0, msg);

        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
        if &header[0..4] != MAGIC {
            return Err(bad("missing CTXL magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(bad(format!("unsupported version {}", version)));
        }
        let num_layers = u16::from_le_bytes([header[6], header[7]]) as usize;
        let dim = u32::from_le_bytes([header[8], header[9], header[10], header[11]]) as usize;
        if num_layers == 0 || dim == 0 {
            return Err(bad("layer count and dimension must be positive".into()));
        }

        let mut data: Vec<Vec<f64>> = sentence_lengths
            .iter()
            .map(|&n| vec![f64::NAN; num_layers * n * dim])
            .collect();
        let mut seen: Vec<Vec<bool>> = sentence_lengths.iter().map(|&n| vec![false; n]).collect();
        let mut idx = [0u8; 8];
        let mut values = vec![0u8; 4 * num_layers * dim];
        loop {
            match r.read_exact(&mut idx) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(Error::io(path, e)),
            }
            let s = u32::from_le_bytes([idx[0], idx[1], idx[2], idx[3]]) as usize;
            let t = u32::from_le_bytes([idx[4], idx[5], idx[6], idx[7]]) as usize;
            r.read_exact(&mut values).map_err(|e| Error::io(path, e))?;
            let n = *sentence_lengths
                .get(s)
                .ok_or_else(|| bad(format!("record for unknown sentence {}", s)))?;
            if t >= n {
                return Err(bad(format!("token {} outside sentence {} of length {}", t, s, n)));
            }
            seen[s][t] = true;
            for l in 0..num_layers {
                for k in 0..dim {
                    let off = 4 * (l * dim + k);
                    let v = f32::from_le_bytes([values[off], values[off + 1], values[off + 2], values[off + 3]]);
                    data[s][(l * n + t) * dim + k] = f64::from(v);
                }
            }
        }
        for (s, flags) in seen.iter().enumerate() {
            if let Some(t) = flags.iter().position(|f| !f) {
                return Err(bad(format!("sentence {} is missing token {}", s, t)));
            }
        }
        let sentences = data
            .into_iter()
            .zip(sentence_lengths)
            .map(|(d, &n)| Tensor::new(vec![num_layers, n, dim], d))
            .collect::<Result<_>>()?;
        Ok(ContextLayers {
            num_layers,
            dim,
            sentences,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.num_layers as u16).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        for (s, t) in self.sentences.iter().enumerate() {
            let n = t.shape()[1];
            for tok in 0..n {
                w.write_all(&(s as u32).to_le_bytes()).map_err(io)?;
                w.write_all(&(tok as u32).to_le_bytes()).map_err(io)?;
                for l in 0..self.num_layers {
                    for k in 0..self.dim {
                        let v = t.data()[(l * n + tok) * self.dim + k] as f32;
                        w.write_all(&v.to_le_bytes()).map_err(io)?;
                    }
                }
            }
        }
        w.flush().map_err(io)
    }
}
