use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Fixed word vectors read from a whitespace-separated text file.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrained {
    pub dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    /// Words that appeared more than once; the last occurrence was kept.
    pub duplicates: Vec<String>,
}

impl Pretrained {
    pub fn empty(dim: usize) -> Self {
        Pretrained {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            duplicates: Vec::new(),
        }
    }

    /// Builds a table from in-memory rows; later rows win on duplicates.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut table = Pretrained::empty(dim);
        for (word, vec) in rows {
            if vec.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for {:?} has {} values, expected {}",
                    word,
                    vec.len(),
                    dim
                )));
            }
            table.insert(word, &vec);
        }
        Ok(table)
    }

    fn insert(&mut self, word: String, vec: &[f64]) {
        if let Some(&row) = self.index.get(&word) {
            self.vectors[row * self.dim..(row + 1) * self.dim].copy_from_slice(vec);
            self.duplicates.push(word);
        } else {
            self.index.insert(word.clone(), self.words.len());
            self.words.push(word);
            self.vectors.extend_from_slice(vec);
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Exact-match row.
    pub fn row(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Row for `form`, falling back to its lowercased form.
    pub fn lookup(&self, form: &str) -> Option<usize> {
        self.row(form).or_else(|| {
            let lower = form.to_lowercase();
            (lower != form).then(|| self.row(&lower)).flatten()
        })
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    /// The whole table as a `len × dim` matrix, or `None` when empty.
    pub fn matrix(&self) -> Option<Tensor> {
        if self.is_empty() {
            return None;
        }
        Some(Tensor::new(vec![self.len(), self.dim], self.vectors.clone()).expect("consistent table"))
    }
}

/// Loads `word v1 … v_dim` lines.
pub fn load_pretrained(path: &Path, dim: usize) -> Result<Pretrained> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = Pretrained::empty(dim);
    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vec = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, lineno + 1, format!("bad number: {}", e)))?;
        if vec.len() != dim {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {} values, found {}", dim, vec.len()),
            ));
        }
        if table.row(word).is_some() {
            log::warn!("{}:{}: duplicate pretrained word {:?}; keeping the last entry", path.display(), lineno + 1, word);
        }
        table.insert(word.to_string(), &vec);
    }
    Ok(table)
}
