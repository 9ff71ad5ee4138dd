//! Treebank and tag-corpus ingestion, vocabularies, pretrained embeddings
//! and prediction output.

mod conll;
mod pretrained;
pub mod synthetic;
mod tags;
pub mod tree;
mod vocab;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use conll::{read_conll, read_conll_with, write_conll};
pub use pretrained::{load_pretrained, Pretrained};
pub use tags::{read_tag_corpus, write_tag_corpus};
pub use vocab::{EncodedSentence, Index, Vocab, MIN_WORD_FREQ, OOV, ROOT};

use crate::error::Error;

/// Feature key carrying a heterogeneous tag inside the FEATS column.
pub const HETERO_FEATURE: &str = "hetero";

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Treebank,
    HeteroTags,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub feats: String,
    /// Homogeneous tag (the treebank's own tag set).
    pub tag: Option<String>,
    /// Heterogeneous tag (an external corpus's tag set).
    pub hetero_tag: Option<String>,
    pub head: Option<usize>,
    pub label: Option<String>,
    pub is_punct: bool,
    /// Predicted columns, when the file carries them separately from gold
    /// (CoNLL-2009 PPOS/PHEAD/PDEPREL).
    pub pred_tag: Option<String>,
    pub pred_head: Option<usize>,
    pub pred_label: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            lemma: "_".into(),
            feats: "_".into(),
            tag: None,
            hetero_tag: None,
            head: None,
            label: None,
            is_punct: false,
            pred_tag: None,
            pred_head: None,
            pred_label: None,
        }
    }

    /// Tag fed to a pipeline parser: the predicted tag when the file has
    /// one, otherwise the tag column.
    pub fn input_tag(&self) -> Option<&str> {
        self.pred_tag.as_deref().or(self.tag.as_deref())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub source: Source,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_tree(&self) -> bool {
        !self.tokens.is_empty() && self.tokens.iter().all(|t| t.head.is_some())
    }

    pub fn heads(&self) -> Option<Vec<usize>> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// Marks tokens whose homogeneous tag is in `punct`.
    pub fn mark_punct(&mut self, punct: &PunctSet) {
        for t in &mut self.tokens {
            t.is_punct = t.tag.as_deref().is_some_and(|tag| punct.contains(tag));
        }
    }
}

/// String-level system output for one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Prediction {
    pub tags: Option<Vec<String>>,
    pub hetero_tags: Option<Vec<String>>,
    pub heads: Option<Vec<usize>>,
    pub labels: Option<Vec<String>>,
}

impl Prediction {
    /// Reads the predicted view of a sentence loaded from a system output
    /// file: the P-columns for CoNLL-2009, the regular columns for CoNLL-X.
    pub fn from_sentence(s: &Sentence, profile: ColumnProfile) -> Prediction {
        let collect_str = |f: &dyn Fn(&Token) -> Option<String>| -> Option<Vec<String>> {
            s.tokens.iter().map(f).collect()
        };
        let hetero_tags = collect_str(&|t| t.hetero_tag.clone());
        match profile {
            ColumnProfile::Conllx => Prediction {
                tags: collect_str(&|t| t.tag.clone()),
                hetero_tags,
                heads: s.tokens.iter().map(|t| t.head).collect(),
                labels: collect_str(&|t| t.label.clone()),
            },
            ColumnProfile::Conll09 => Prediction {
                tags: collect_str(&|t| t.pred_tag.clone()),
                hetero_tags,
                heads: s.tokens.iter().map(|t| t.pred_head).collect(),
                labels: collect_str(&|t| t.pred_label.clone()),
            },
        }
    }
}

/// Column layout of a CoNLL file.
///
/// * `conllx`: ID FORM LEMMA CPOS POS FEATS HEAD DEPREL [PHEAD PDEPREL]
/// * `conll09`: ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL
///   PDEPREL [FILLPRED PRED APREDs…]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ColumnProfile {
    Conllx,
    Conll09,
}

impl FromStr for ColumnProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "conllx" => Ok(ColumnProfile::Conllx),
            "conll09" => Ok(ColumnProfile::Conll09),
            other => Err(Error::Config(format!(
                "unknown column profile {:?} (expected conllx or conll09)",
                other
            ))),
        }
    }
}

impl fmt::Display for ColumnProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnProfile::Conllx => "conllx",
            ColumnProfile::Conll09 => "conll09",
        })
    }
}

/// Tags treated as punctuation when scoring attachments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PunctSet(BTreeSet<String>);

impl PunctSet {
    /// `` '' : , .
    pub fn ptb() -> Self {
        Self::from_tags(["``", "''", ":", ",", "."])
    }

    pub fn none() -> Self {
        PunctSet(BTreeSet::new())
    }

    pub fn from_tags<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PunctSet(tags.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for PunctSet {
    fn default() -> Self {
        Self::ptb()
    }
}
