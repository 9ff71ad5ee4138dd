use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Sentence, Source};
use crate::error::{Error, Result};

/// Id of the pseudo-root entry in the word and character inventories.
pub const ROOT: usize = 0;
/// Id of the out-of-vocabulary entry in the word and character inventories.
pub const OOV: usize = 1;
/// Training words seen fewer times than this are folded into [`OOV`].
pub const MIN_WORD_FREQ: usize = 2;

const ROOT_STR: &str = "<root>";
const OOV_STR: &str = "<unk>";

/// Offset of real tags in pipeline tag-input ids (0 root, 1 unknown).
pub const TAG_INPUT_OFFSET: usize = 2;

/// A bijection between strings and dense ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Index {
    items: Vec<String>,
    map: HashMap<String, usize>,
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_items<I, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = Index::new();
        for item in items {
            let item = item.into();
            if index.get(&item).is_some() {
                return Err(Error::Validation(format!("duplicate inventory entry {:?}", item)));
            }
            index.insert(item);
        }
        Ok(index)
    }

    pub fn insert(&mut self, item: impl Into<String>) -> usize {
        let item = item.into();
        if let Some(&id) = self.map.get(&item) {
            return id;
        }
        let id = self.items.len();
        self.map.insert(item.clone(), id);
        self.items.push(item);
        id
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.map.get(item).copied()
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Inventories for words, characters, both tag sets and dependency labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    pub words: Index,
    pub chars: Index,
    pub tags: Index,
    pub hetero_tags: Index,
    pub labels: Index,
}

/// A sentence resolved to ids. Word-level vectors include the root at
/// position 0; per-dependent vectors (`tags`, `heads`, …) cover tokens
/// 1..=n only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub source: Source,
    pub words: Vec<usize>,
    pub pretrained: Vec<Option<usize>>,
    pub chars: Vec<Vec<usize>>,
    pub tags: Option<Vec<usize>>,
    pub hetero_tags: Option<Vec<usize>>,
    pub heads: Option<Vec<usize>>,
    pub labels: Option<Vec<usize>>,
    /// Pipeline tag inputs (with root), offset by [`TAG_INPUT_OFFSET`].
    pub input_tags: Vec<usize>,
    pub input_hetero_tags: Vec<usize>,
}

impl EncodedSentence {
    /// Number of real tokens.
    pub fn len(&self) -> usize {
        self.words.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn sorted_index(specials: &[&str], items: BTreeSet<String>) -> Index {
    let mut index = Index::new();
    for s in specials {
        index.insert(*s);
    }
    for item in items {
        index.insert(item);
    }
    index
}

impl Vocab {
    /// Builds inventories. Word frequencies come from treebank sentences
    /// only; characters from every sentence; each tag set and the label set
    /// from the sentences that carry them.
    pub fn build(treebank: &[Sentence], hetero: &[Sentence]) -> Result<Self> {
        if treebank.is_empty() {
            return Err(Error::Validation("cannot build a vocabulary from an empty treebank".into()));
        }
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        let mut chars = BTreeSet::new();
        let mut tags = BTreeSet::new();
        let mut hetero_tags = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for s in treebank.iter().chain(hetero) {
            for t in &s.tokens {
                if s.source == Source::Treebank && t.form != ROOT_STR && t.form != OOV_STR {
                    *freq.entry(t.form.as_str()).or_default() += 1;
                }
                chars.extend(t.form.chars().map(String::from));
                tags.extend(t.tag.clone());
                hetero_tags.extend(t.hetero_tag.clone());
                labels.extend(t.label.clone());
            }
        }
        let kept = freq
            .into_iter()
            .filter(|&(_, c)| c >= MIN_WORD_FREQ)
            .map(|(w, _)| w.to_string())
            .collect();
        Ok(Vocab {
            words: sorted_index(&[ROOT_STR, OOV_STR], kept),
            chars: sorted_index(&[ROOT_STR, OOV_STR], chars),
            tags: sorted_index(&[], tags),
            hetero_tags: sorted_index(&[], hetero_tags),
            labels: sorted_index(&[], labels),
        })
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.words.get(form).filter(|&id| id > OOV).unwrap_or(OOV)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        form.chars()
            .map(|c| {
                let mut buf = [0u8; 4];
                self.chars.get(c.encode_utf8(&mut buf)).filter(|&id| id > OOV).unwrap_or(OOV)
            })
            .collect()
    }

    /// The form as the model sees it: itself when kept, `<unk>` otherwise.
    pub fn fold<'a>(&'a self, form: &'a str) -> &'a str {
        self.words.item(self.word_id(form))
    }

    /// Resolves a sentence. Gold sequences are `None` when any token lacks
    /// the annotation or carries a value outside the inventory. Pretrained
    /// rows are resolved with `pretrained_row` when given.
    pub fn encode(&self, s: &Sentence, pretrained_row: Option<&dyn Fn(&str) -> Option<usize>>) -> Result<EncodedSentence> {
        if s.is_empty() {
            return Err(Error::Validation("cannot encode an empty sentence".into()));
        }
        let mut words = vec![ROOT];
        let mut pre = vec![None];
        let mut chars = vec![vec![ROOT]];
        for t in &s.tokens {
            if t.form.is_empty() {
                return Err(Error::Validation("token with empty form".into()));
            }
            words.push(self.word_id(&t.form));
            pre.push(pretrained_row.and_then(|f| f(&t.form)));
            chars.push(self.char_ids(&t.form));
        }
        let gold = |f: &dyn Fn(&super::Token) -> Option<usize>| -> Option<Vec<usize>> { s.tokens.iter().map(f).collect() };
        let tags = gold(&|t| t.tag.as_deref().and_then(|x| self.tags.get(x)));
        let hetero_tags = gold(&|t| t.hetero_tag.as_deref().and_then(|x| self.hetero_tags.get(x)));
        let heads = gold(&|t| t.head);
        let labels = gold(&|t| t.label.as_deref().and_then(|x| self.labels.get(x)));
        let input = |index: &Index, get: &dyn Fn(&super::Token) -> Option<&str>| -> Vec<usize> {
            std::iter::once(0)
                .chain(s.tokens.iter().map(|t| get(t).and_then(|x| index.get(x)).map_or(1, |id| id + TAG_INPUT_OFFSET)))
                .collect()
        };
        Ok(EncodedSentence {
            source: s.source,
            words,
            pretrained: pre,
            chars,
            tags,
            hetero_tags,
            heads,
            labels,
            input_tags: input(&self.tags, &|t| t.input_tag()),
            input_hetero_tags: input(&self.hetero_tags, &|t| t.hetero_tag.as_deref()),
        })
    }

    /// Plain-text serialization: for each inventory a `name count` line
    /// followed by one entry per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, index) in self.sections() {
            out.push_str(&format!("{} {}\n", name, index.len()));
            for item in index.items() {
                out.push_str(item);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut read = |expected: &str| -> Result<Index> {
            let header = lines
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("missing vocabulary section {}", expected)))?;
            let (name, count) = header
                .split_once(' ')
                .ok_or_else(|| Error::Checkpoint(format!("bad vocabulary header {:?}", header)))?;
            if name != expected {
                return Err(Error::Checkpoint(format!("expected section {}, found {}", expected, name)));
            }
            let count: usize = count
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad vocabulary count {:?}", count)))?;
            let mut items = Vec::with_capacity(count);
            for _ in 0..count {
                items.push(lines.next().ok_or_else(|| Error::Checkpoint("truncated vocabulary".into()))?);
            }
            Index::from_items(items).map_err(|e| Error::Checkpoint(e.to_string()))
        };
        Ok(Vocab {
            words: read("words")?,
            chars: read("chars")?,
            tags: read("tags")?,
            hetero_tags: read("hetero_tags")?,
            labels: read("labels")?,
        })
    }

    fn sections(&self) -> [(&'static str, &Index); 5] {
        [
            ("words", &self.words),
            ("chars", &self.chars),
            ("tags", &self.tags),
            ("hetero_tags", &self.hetero_tags),
            ("labels", &self.labels),
        ]
    }
}
