//! A small English-like grammar that generates PTB-tagged dependency trees,
//! with lexically ambiguous words so tags must be resolved from context.

use super::{Sentence, Source, Token};
use crate::rng::RngStream;

const DT: &[&str] = &["the", "a", "this", "every", "some"];
const JJ: &[&str] = &["old", "green", "quiet", "light", "fast", "small", "bright", "cold"];
const NN: &[&str] = &["dog", "city", "saw", "light", "run", "river", "plan", "walk", "house", "model"];
const NNS: &[&str] = &["dogs", "cities", "walks", "plans", "rivers", "houses", "models", "runs"];
const NNP: &[&str] = &["Paris", "Mary", "Chen", "Oslo", "Ravi"];
const PRP: &[&str] = &["she", "they", "he", "we"];
const VBD: &[&str] = &["saw", "found", "liked", "built", "moved", "walked", "watched"];
const VBZ: &[&str] = &["walks", "plans", "runs", "likes", "builds", "seems", "looks"];
const VB: &[&str] = &["run", "walk", "plan", "see", "build", "like", "light"];
const MD: &[&str] = &["will", "can", "may"];
const RB: &[&str] = &["fast", "slowly", "often", "very", "never"];
const IN: &[&str] = &["in", "near", "like", "with", "from"];
const CC: &[&str] = &["and", "or"];

struct Builder<'a> {
    tokens: Vec<Token>,
    rng: &'a mut RngStream,
}

impl<'a> Builder<'a> {
    fn push(&mut self, words: &[&str], tag: &str) -> usize {
        let form = words[self.rng.below(words.len())].to_string();
        let mut t = Token::new(form.clone());
        t.lemma = form.to_lowercase();
        t.tag = Some(tag.to_string());
        self.tokens.push(t);
        self.tokens.len()
    }

    fn attach(&mut self, dep: usize, head: usize, label: &str) {
        let t = &mut self.tokens[dep - 1];
        t.head = Some(head);
        t.label = Some(label.to_string());
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.bernoulli(p)
    }

    fn noun_phrase(&mut self, depth: usize) -> usize {
        let r = self.rng.uniform();
        let head = if r < 0.15 {
            self.push(PRP, "PRP")
        } else if r < 0.3 {
            self.push(NNP, "NNP")
        } else {
            let det = self.chance(0.7).then(|| self.push(DT, "DT"));
            let mut adjs = Vec::new();
            while adjs.len() < 2 && self.chance(0.35) {
                adjs.push(self.push(JJ, "JJ"));
            }
            let noun = if self.chance(0.7) {
                self.push(NN, "NN")
            } else {
                self.push(NNS, "NNS")
            };
            if let Some(d) = det {
                self.attach(d, noun, "det");
            }
            for a in adjs {
                self.attach(a, noun, "amod");
            }
            noun
        };
        if depth == 0 && self.chance(0.2) {
            self.prep_phrase(head, depth + 1);
        }
        if depth == 0 && self.chance(0.1) {
            let cc = self.push(CC, "CC");
            self.attach(cc, head, "cc");
            let conj = self.noun_phrase(depth + 1);
            self.attach(conj, head, "conj");
        }
        head
    }

    fn prep_phrase(&mut self, head: usize, depth: usize) {
        let p = self.push(IN, "IN");
        self.attach(p, head, "prep");
        let obj = self.noun_phrase(depth);
        self.attach(obj, p, "pobj");
    }

    fn verb_phrase(&mut self) -> usize {
        let r = self.rng.uniform();
        if r < 0.4 {
            let v = self.push(VBD, "VBD");
            let obj = self.noun_phrase(0);
            self.attach(obj, v, "dobj");
            if self.chance(0.3) {
                self.prep_phrase(v, 1);
            }
            v
        } else if r < 0.6 {
            let v = self.push(VBZ, "VBZ");
            let adv = self.chance(0.4).then(|| self.push(RB, "RB"));
            let adj = self.push(JJ, "JJ");
            if let Some(a) = adv {
                self.attach(a, adj, "advmod");
            }
            self.attach(adj, v, "acomp");
            v
        } else if r < 0.8 {
            let m = self.push(MD, "MD");
            let v = self.push(VB, "VB");
            self.attach(m, v, "aux");
            let obj = self.noun_phrase(0);
            self.attach(obj, v, "dobj");
            v
        } else {
            let v = if self.chance(0.5) {
                self.push(VBZ, "VBZ")
            } else {
                self.push(VBD, "VBD")
            };
            if self.chance(0.5) {
                let a = self.push(RB, "RB");
                self.attach(a, v, "advmod");
            }
            if self.chance(0.5) {
                self.prep_phrase(v, 1);
            }
            v
        }
    }

    fn sentence(&mut self) -> Sentence {
        let fronted = self.chance(0.1).then(|| {
            let p = self.push(IN, "IN");
            let obj = self.noun_phrase(1);
            self.attach(obj, p, "pobj");
            let comma = self.push(&[","], ",");
            (p, comma)
        });
        let subj = self.noun_phrase(0);
        let verb = self.verb_phrase();
        self.attach(subj, verb, "nsubj");
        self.attach(verb, 0, "root");
        if let Some((p, comma)) = fronted {
            self.attach(p, verb, "prep");
            self.attach(comma, verb, "punct");
        }
        if self.chance(0.9) {
            let stop = self.push(&["."], ".");
            self.attach(stop, verb, "punct");
        }
        Sentence {
            tokens: std::mem::take(&mut self.tokens),
            source: Source::Treebank,
        }
    }
}

/// Generates `count` tagged and parsed sentences.
pub fn treebank(count: usize, rng: &mut RngStream) -> Vec<Sentence> {
    let mut b = Builder { tokens: Vec::new(), rng };
    (0..count).map(|_| b.sentence()).collect()
}

/// Coarse tag set used by the heterogeneous corpus.
pub fn coarse_tag(tag: &str) -> &'static str {
    match tag {
        "NN" | "NNS" | "NNP" => "n",
        "PRP" | "DT" => "r",
        "VB" | "VBD" | "VBZ" | "MD" => "v",
        "JJ" => "a",
        "RB" => "d",
        "IN" => "p",
        "CC" => "c",
        _ => "w",
    }
}

/// Generates `count` sentences annotated only with coarse tags.
pub fn hetero_corpus(count: usize, rng: &mut RngStream) -> Vec<Sentence> {
    treebank(count, rng)
        .into_iter()
        .map(|s| Sentence {
            tokens: s
                .tokens
                .into_iter()
                .map(|t| {
                    let mut out = Token::new(t.form);
                    out.hetero_tag = t.tag.as_deref().map(|x| coarse_tag(x).to_string());
                    out
                })
                .collect(),
            source: Source::HeteroTags,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tree::is_tree;

    #[test]
    fn generated_trees_are_well_formed() {
        let mut rng = RngStream::new(3);
        for s in treebank(500, &mut rng) {
            let heads = s.heads().expect("all heads set");
            assert!(is_tree(&heads), "{:?}", s.forms());
            assert!(s.tokens.iter().all(|t| t.tag.is_some() && t.label.is_some()));
        }
    }

    #[test]
    fn deterministic() {
        let a = treebank(20, &mut RngStream::new(9));
        let b = treebank(20, &mut RngStream::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn hetero_has_no_trees() {
        let s = hetero_corpus(10, &mut RngStream::new(1));
        assert!(s.iter().all(|s| !s.has_tree() && s.tokens.iter().all(|t| t.hetero_tag.is_some())));
    }
}
