//! Self-describing model file: a text header (format line, model spec,
//! vocabulary, pretrained word list) followed by binary parameter blobs
//! (name, shape, little-endian `f64` values).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::corpus::{Pretrained, Vocab};
use crate::error::{Error, Result};

use super::{Model, ModelSpec};

const FORMAT_LINE: &str = "jointdep-checkpoint 1";

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(bad("truncated parameter data"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn section<'a>(line: &'a str, name: &str) -> Result<Vec<&'a str>> {
    let mut parts = line.split(' ');
    if parts.next() != Some(name) {
        return Err(bad(format!("expected section {}, found {:?}", name, line)));
    }
    Ok(parts.collect())
}

fn count(field: Option<&&str>) -> Result<usize> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| bad("bad section count"))
}

impl Model {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let spec = self.spec.to_text();
        let vocab = self.vocab.to_text();
        out.extend_from_slice(format!("{}\n", FORMAT_LINE).as_bytes());
        out.extend_from_slice(format!("[spec] {}\n{}", spec.lines().count(), spec).as_bytes());
        out.extend_from_slice(format!("[vocab] {}\n{}", vocab.lines().count(), vocab).as_bytes());
        out.extend_from_slice(format!("[pretrained] {} {}\n", self.pretrained.len(), self.pretrained.dim).as_bytes());
        for w in self.pretrained.words() {
            out.extend_from_slice(w.as_bytes());
            out.push(b'\n');
        }
        out.extend_from_slice(format!("[params] {}\n", self.store.len()).as_bytes());
        for (_, p) in self.store.iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
            for &d in p.value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in p.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint. With `expected`, a stored spec that differs in
    /// any field is rejected.
    pub fn load(path: &Path, expected: Option<&ModelSpec>) -> Result<Model> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut c = Cursor { bytes: &bytes, pos: 0 };
        if c.line()? != FORMAT_LINE {
            return Err(bad(format!("{} is not a model checkpoint", path.display())));
        }
        let header = section(c.line()?, "[spec]")?;
        let mut spec_text = String::new();
        for _ in 0..count(header.first())? {
            spec_text.push_str(c.line()?);
            spec_text.push('\n');
        }
        let spec = ModelSpec::from_text(&spec_text).map_err(|e| bad(e.to_string()))?;
        if let Some(exp) = expected {
            let differing: Vec<String> = spec
                .pairs()
                .into_iter()
                .zip(exp.pairs())
                .filter(|(a, b)| a.1 != b.1)
                .map(|(a, b)| format!("{} (stored {}, expected {})", a.0, a.1, b.1))
                .collect();
            if !differing.is_empty() {
                return Err(bad(format!("model spec mismatch: {}", differing.join(", "))));
            }
        }
        let header = section(c.line()?, "[vocab]")?;
        let mut vocab_text = String::new();
        for _ in 0..count(header.first())? {
            vocab_text.push_str(c.line()?);
            vocab_text.push('\n');
        }
        let vocab = Vocab::from_text(&vocab_text)?;
        let header = section(c.line()?, "[pretrained]")?;
        let n_pre = count(header.first())?;
        let dim = count(header.get(1))?;
        let mut pre_words = Vec::with_capacity(n_pre);
        for _ in 0..n_pre {
            pre_words.push(c.line()?.to_string());
        }
        let header = section(c.line()?, "[params]")?;
        let n_params = count(header.first())?;
        let mut blobs: HashMap<String, Tensor> = HashMap::new();
        for _ in 0..n_params {
            let len = c.u32()? as usize;
            let name = std::str::from_utf8(c.take(len)?)
                .map_err(|_| bad("parameter name is not UTF-8"))?
                .to_string();
            let rank = c.u32()? as usize;
            let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let data = c
                .take(numel * 8)?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| bad(format!("{}: {}", name, e)))?;
            blobs.insert(name, t);
        }
        if c.pos != bytes.len() {
            return Err(bad("trailing bytes after parameters"));
        }
        let pretrained = if n_pre == 0 {
            Pretrained::empty(dim)
        } else {
            let table = blobs
                .get("word.pretrained")
                .ok_or_else(|| bad("pretrained words listed but no pretrained table stored"))?;
            if table.shape() != [n_pre, dim] {
                return Err(bad("pretrained table shape disagrees with its word list"));
            }
            let rows = pre_words
                .into_iter()
                .enumerate()
                .map(|(i, w)| (w, table.row_slice(i).to_vec()))
                .collect();
            Pretrained::from_rows(dim, rows)?
        };
        let mut model = Model::new(spec, vocab, pretrained)?;
        if blobs.len() != model.store.len() {
            return Err(bad(format!(
                "checkpoint has {} parameters, model expects {}",
                blobs.len(),
                model.store.len()
            )));
        }
        for p in model.store.iter_mut() {
            let blob = blobs
                .remove(&p.name)
                .ok_or_else(|| bad(format!("missing parameter {}", p.name)))?;
            if blob.shape() != p.value.shape() {
                return Err(bad(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    p.name,
                    blob.shape(),
                    p.value.shape()
                )));
            }
            p.value = blob;
        }
        Ok(model)
    }
}
