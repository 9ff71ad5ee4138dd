use std::fmt;

use crate::corpus::{Prediction, Sentence};
use crate::decode::DecodeMode;
use crate::error::{Error, Result};

/// Corpus-level accuracy figures in percent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub ta: Option<f64>,
    pub hetero_ta: Option<f64>,
    pub uas: Option<f64>,
    pub las: Option<f64>,
    pub total_tokens: usize,
    /// Tokens counted for UAS/LAS.
    pub scored_tokens: usize,
    /// Tokens skipped for UAS/LAS as punctuation.
    pub excluded_punct: usize,
    pub decode: Option<DecodeMode>,
}

impl EvalReport {
    /// Dev-selection key: LAS then TA for parsers, TA for taggers.
    pub fn selection_key(&self) -> (f64, f64) {
        match self.las {
            Some(las) => (las, self.ta.unwrap_or(0.0)),
            None => (self.ta.or(self.hetero_ta).unwrap_or(0.0), 0.0),
        }
    }
}

fn pct(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.ta {
            parts.push(format!("TA {:.2}", v));
        }
        if let Some(v) = self.hetero_ta {
            parts.push(format!("hetero TA {:.2}", v));
        }
        if let Some(v) = self.uas {
            parts.push(format!("UAS {:.2}", v));
        }
        if let Some(v) = self.las {
            parts.push(format!("LAS {:.2}", v));
        }
        write!(
            f,
            "{} (tokens {}, scored {}, punctuation excluded {}",
            parts.join("  "),
            self.total_tokens,
            self.scored_tokens,
            self.excluded_punct
        )?;
        if let Some(d) = self.decode {
            write!(f, ", decode {}", d)?;
        }
        write!(f, ")")
    }
}

/// Checks that every prediction sequence matches its sentence length.
pub fn check_alignment(gold: &[Sentence], preds: &[Prediction]) -> Result<()> {
    if gold.len() != preds.len() {
        return Err(Error::Alignment(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            preds.len()
        )));
    }
    for (i, (s, p)) in gold.iter().zip(preds).enumerate() {
        let lens = [
            p.tags.as_ref().map(Vec::len),
            p.hetero_tags.as_ref().map(Vec::len),
            p.heads.as_ref().map(Vec::len),
            p.labels.as_ref().map(Vec::len),
        ];
        if let Some(l) = lens.iter().flatten().find(|&&l| l != s.len()) {
            return Err(Error::Alignment(format!(
                "sentence {} has {} tokens but {} predictions",
                i + 1,
                s.len(),
                l
            )));
        }
    }
    Ok(())
}

/// Token-level tallies for one sentence.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tokens: usize,
    pub tag_total: usize,
    pub tag_correct: usize,
    pub hetero_total: usize,
    pub hetero_correct: usize,
    pub scored: usize,
    pub excluded: usize,
    pub head_correct: usize,
    pub label_correct: usize,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.tokens += o.tokens;
        self.tag_total += o.tag_total;
        self.tag_correct += o.tag_correct;
        self.hetero_total += o.hetero_total;
        self.hetero_correct += o.hetero_correct;
        self.scored += o.scored;
        self.excluded += o.excluded;
        self.head_correct += o.head_correct;
        self.label_correct += o.label_correct;
    }
}

/// Counts for one aligned sentence.
pub fn sentence_counts(s: &Sentence, p: &Prediction, exclude_punct: bool) -> Counts {
    let mut c = Counts {
        tokens: s.len(),
        ..Default::default()
    };
    for (i, t) in s.tokens.iter().enumerate() {
        if let (Some(gold), Some(pred)) = (&t.tag, &p.tags) {
            c.tag_total += 1;
            c.tag_correct += (*gold == pred[i]) as usize;
        }
        if let (Some(gold), Some(pred)) = (&t.hetero_tag, &p.hetero_tags) {
            c.hetero_total += 1;
            c.hetero_correct += (*gold == pred[i]) as usize;
        }
        if let (Some(gold), Some(pred)) = (t.head, &p.heads) {
            if exclude_punct && t.is_punct {
                c.excluded += 1;
                continue;
            }
            c.scored += 1;
            if gold == pred[i] {
                c.head_correct += 1;
                let label_ok = match (&t.label, &p.labels) {
                    (Some(g), Some(l)) => *g == l[i],
                    _ => false,
                };
                c.label_correct += label_ok as usize;
            }
        }
    }
    c
}

/// TA over all tokens; UAS/LAS over tokens not excluded as punctuation.
pub fn evaluate(gold: &[Sentence], preds: &[Prediction], exclude_punct: bool) -> Result<EvalReport> {
    check_alignment(gold, preds)?;
    let mut c = Counts::default();
    for (s, p) in gold.iter().zip(preds) {
        c.add(&sentence_counts(s, p, exclude_punct));
    }
    let has = |f: fn(&Prediction) -> bool| preds.iter().any(f);
    let parsed = has(|p| p.heads.is_some()) && gold.iter().any(|s| s.has_tree());
    let excluded = if parsed { c.excluded } else if exclude_punct { gold.iter().flat_map(|s| &s.tokens).filter(|t| t.is_punct).count() } else { 0 };
    Ok(EvalReport {
        ta: (c.tag_total > 0 && has(|p| p.tags.is_some())).then(|| pct(c.tag_correct, c.tag_total)),
        hetero_ta: (c.hetero_total > 0).then(|| pct(c.hetero_correct, c.hetero_total)),
        uas: parsed.then(|| pct(c.head_correct, c.scored)),
        las: parsed.then(|| pct(c.label_correct, c.scored)),
        total_tokens: c.tokens,
        scored_tokens: c.tokens - excluded,
        excluded_punct: excluded,
        decode: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, Token};

    pub(crate) fn sentence(tags: &[&str], heads: &[usize], labels: &[&str], punct: &[bool]) -> Sentence {
        Sentence {
            tokens: (0..tags.len())
                .map(|i| {
                    let mut t = Token::new(format!("w{}", i));
                    t.tag = Some(tags[i].into());
                    t.head = Some(heads[i]);
                    t.label = Some(labels[i].into());
                    t.is_punct = punct[i];
                    t
                })
                .collect(),
            source: Source::Treebank,
        }
    }

    fn pred(tags: &[&str], heads: &[usize], labels: &[&str]) -> Prediction {
        Prediction {
            tags: Some(tags.iter().map(|s| s.to_string()).collect()),
            hetero_tags: None,
            heads: Some(heads.to_vec()),
            labels: Some(labels.iter().map(|s| s.to_string()).collect()),
        }
    }

    #[test]
    fn three_of_four_heads_two_labels() {
        let g = sentence(&["A"; 4], &[2, 0, 2, 3], &["a", "r", "b", "c"], &[false; 4]);
        let p = pred(&["A"; 4], &[2, 0, 2, 1], &["a", "r", "x", "c"]);
        let r = evaluate(&[g], &[p], false).unwrap();
        assert_eq!(format!("{:.2}", r.uas.unwrap()), "75.00");
        assert_eq!(format!("{:.2}", r.las.unwrap()), "50.00");
    }

    #[test]
    fn punct_excluded_from_attachment_only() {
        let g = sentence(&["A", "B", "A", "B", "."], &[2, 0, 2, 3, 2], &["x"; 5], &[false, false, false, false, true]);
        let p = pred(&["A", "B", "A", "B", "X"], &[2, 0, 2, 3, 1], &["x"; 5]);
        let r = evaluate(&[g], &[p], true).unwrap();
        assert_eq!(r.uas, Some(100.0));
        assert_eq!(r.ta, Some(80.0));
        assert_eq!((r.scored_tokens, r.excluded_punct, r.total_tokens), (4, 1, 5));
    }

    #[test]
    fn misaligned_is_error() {
        let g = sentence(&["A"], &[0], &["r"], &[false]);
        let p = pred(&["A", "B"], &[0, 1], &["r", "r"]);
        assert!(matches!(evaluate(&[g], &[p], false), Err(Error::Alignment(_))));
    }
}
