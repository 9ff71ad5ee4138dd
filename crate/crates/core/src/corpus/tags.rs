use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Sentence, Source, Token};
use crate::error::{Error, Result};

/// Reads a two-column (form, tag) corpus with blank-line sentence breaks.
/// Tags are stored as heterogeneous tags.
pub fn read_tag_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tag_corpus(&text, path)
}

pub(crate) fn parse_tag_corpus(text: &str, path: &Path) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            if !tokens.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut tokens),
                    source: Source::HeteroTags,
                });
            }
            continue;
        }
        if cols.len() != 2 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 2 columns (form, tag), found {}", cols.len()),
            ));
        }
        let mut tok = Token::new(cols[0]);
        tok.hetero_tag = Some(cols[1].to_string());
        tokens.push(tok);
    }
    if !tokens.is_empty() {
        sentences.push(Sentence {
            tokens,
            source: Source::HeteroTags,
        });
    }
    Ok(sentences)
}

/// Writes sentences in the two-column format using each token's
/// heterogeneous tag (or its homogeneous tag when it has none).
pub fn write_tag_corpus(path: &Path, sentences: &[Sentence]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for s in sentences {
        for t in &s.tokens {
            let tag = t.hetero_tag.as_deref().or(t.tag.as_deref()).ok_or_else(|| {
                Error::Validation(format!("token {:?} has no tag to write", t.form))
            })?;
            writeln!(w, "{}\t{}", t.form, tag).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
