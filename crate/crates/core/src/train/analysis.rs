use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::eval::{check_alignment, sentence_counts, Counts};
use crate::corpus::{Prediction, Sentence};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Name reported with every significance result.
pub const SIGNIFICANCE_TEST: &str = "paired sentence-level permutation test";

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Metric {
    Ta,
    Uas,
    Las,
}

impl Metric {
    fn of(self, c: &Counts) -> (usize, usize) {
        match self {
            Metric::Ta => (c.tag_correct, c.tag_total),
            Metric::Uas => (c.head_correct, c.scored),
            Metric::Las => (c.label_correct, c.scored),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ta" => Ok(Metric::Ta),
            "uas" => Ok(Metric::Uas),
            "las" => Ok(Metric::Las),
            _ => Err(Error::Config(format!("unknown metric {:?} (expected ta, uas or las)", s))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Ta => "TA",
            Metric::Uas => "UAS",
            Metric::Las => "LAS",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Significance {
    pub metric: Metric,
    pub score_a: f64,
    pub score_b: f64,
    /// `score_b - score_a`
    pub delta: f64,
    pub p_value: f64,
    pub trials: usize,
    pub test: &'static str,
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: A {:.2}  B {:.2}  delta {:+.2}  p = {:.4} ({}, {} trials)",
            self.metric, self.score_a, self.score_b, self.delta, self.p_value, self.test, self.trials
        )
    }
}

fn ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

/// Two-sided paired permutation test: each trial swaps the two systems'
/// outputs on a random subset of sentences. The p-value is
/// `(hits + 1) / (trials + 1)`, where a hit is a trial whose absolute
/// metric difference reaches the observed one.
pub fn significance(
    gold: &[Sentence],
    a: &[Prediction],
    b: &[Prediction],
    metric: Metric,
    exclude_punct: bool,
    trials: usize,
    seed: u64,
) -> Result<Significance> {
    check_alignment(gold, a)?;
    check_alignment(gold, b)?;
    let per: Vec<((usize, usize), (usize, usize))> = gold
        .iter()
        .zip(a.iter().zip(b))
        .map(|(s, (pa, pb))| {
            (
                metric.of(&sentence_counts(s, pa, exclude_punct)),
                metric.of(&sentence_counts(s, pb, exclude_punct)),
            )
        })
        .collect();
    let total: usize = per.iter().map(|(x, _)| x.1).sum();
    let sum_a: usize = per.iter().map(|(x, _)| x.0).sum();
    let sum_b: usize = per.iter().map(|(_, y)| y.0).sum();
    let observed = (sum_b as f64 - sum_a as f64).abs();
    let mut rng = RngStream::new(seed).fork("permutation");
    let mut hits = 0;
    for _ in 0..trials {
        let mut diff: i64 = 0;
        for ((ca, _), (cb, _)) in &per {
            let d = *cb as i64 - *ca as i64;
            diff += if rng.bernoulli(0.5) { -d } else { d };
        }
        if (diff.unsigned_abs() as f64) >= observed {
            hits += 1;
        }
    }
    let (score_a, score_b) = (ratio(sum_a, total), ratio(sum_b, total));
    Ok(Significance {
        metric,
        score_a,
        score_b,
        delta: score_b - score_a,
        p_value: (hits + 1) as f64 / (trials + 1) as f64,
        trials,
        test: SIGNIFICANCE_TEST,
    })
}

/// Accuracy change from system A to system B for one gold tag.
#[derive(Clone, Debug, PartialEq)]
pub struct PosDelta {
    pub tag: String,
    pub tokens: usize,
    pub ta_a: f64,
    pub ta_b: f64,
    pub delta_ta: f64,
    /// Dependents with this gold tag that count for attachment scores.
    pub arcs: usize,
    pub las_a: Option<f64>,
    pub las_b: Option<f64>,
    pub delta_las: Option<f64>,
}

#[derive(Default)]
struct TagTally {
    tokens: usize,
    tag_a: usize,
    tag_b: usize,
    arcs: usize,
    las_a: usize,
    las_b: usize,
}

fn label_ok(s: &Sentence, p: &Prediction, i: usize) -> bool {
    let t = &s.tokens[i];
    let head = matches!((t.head, &p.heads), (Some(g), Some(h)) if g == h[i]);
    let label = matches!((&t.label, &p.labels), (Some(g), Some(l)) if *g == l[i]);
    head && label
}

fn tag_ok(s: &Sentence, p: &Prediction, i: usize) -> bool {
    matches!((&s.tokens[i].tag, &p.tags), (Some(g), Some(t)) if *g == t[i])
}

/// Per gold tag: TA over words with that tag and LAS over arcs whose
/// dependent has that tag, for both systems and their difference (B − A).
pub fn per_pos_delta(gold: &[Sentence], a: &[Prediction], b: &[Prediction], exclude_punct: bool) -> Result<Vec<PosDelta>> {
    check_alignment(gold, a)?;
    check_alignment(gold, b)?;
    let mut table: BTreeMap<&str, TagTally> = BTreeMap::new();
    for ((s, pa), pb) in gold.iter().zip(a).zip(b) {
        for (i, t) in s.tokens.iter().enumerate() {
            let Some(tag) = t.tag.as_deref() else { continue };
            let e = table.entry(tag).or_default();
            e.tokens += 1;
            e.tag_a += tag_ok(s, pa, i) as usize;
            e.tag_b += tag_ok(s, pb, i) as usize;
            if t.head.is_some() && !(exclude_punct && t.is_punct) {
                e.arcs += 1;
                e.las_a += label_ok(s, pa, i) as usize;
                e.las_b += label_ok(s, pb, i) as usize;
            }
        }
    }
    Ok(table
        .into_iter()
        .map(|(tag, e)| {
            let (ta_a, ta_b) = (ratio(e.tag_a, e.tokens), ratio(e.tag_b, e.tokens));
            let las = |c| (e.arcs > 0).then(|| ratio(c, e.arcs));
            let (las_a, las_b) = (las(e.las_a), las(e.las_b));
            PosDelta {
                tag: tag.to_string(),
                tokens: e.tokens,
                ta_a,
                ta_b,
                delta_ta: ta_b - ta_a,
                arcs: e.arcs,
                las_a,
                las_b,
                delta_las: las_a.zip(las_b).map(|(x, y)| y - x),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{:.2}", v))
}

pub fn pos_delta_tsv(rows: &[PosDelta]) -> String {
    let mut out = String::from("tag\ttokens\tTA_A\tTA_B\tdelta_TA\tarcs\tLAS_A\tLAS_B\tdelta_LAS\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.2}\t{:.2}\t{:+.2}\t{}\t{}\t{}\t{}\n",
            r.tag,
            r.tokens,
            r.ta_a,
            r.ta_b,
            r.delta_ta,
            r.arcs,
            opt(r.las_a),
            opt(r.las_b),
            r.delta_las.map_or("-".into(), |d| format!("{:+.2}", d))
        ));
    }
    out
}

/// Attachment accuracy over a set of words.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternRow {
    pub gold_tag: String,
    pub pred_tag: String,
    pub support: usize,
    pub uas: f64,
    pub las: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatternTable {
    /// One row per (gold tag, predicted tag) over scored tokens.
    pub rows: Vec<PatternRow>,
    /// Words whose predicted tag is correct.
    pub correct_tag: PatternRow,
    /// Words whose predicted tag is wrong.
    pub wrong_tag: PatternRow,
}

#[derive(Default)]
struct Tally {
    support: usize,
    heads: usize,
    labels: usize,
}

impl Tally {
    fn row(&self, gold: &str, pred: &str) -> PatternRow {
        PatternRow {
            gold_tag: gold.into(),
            pred_tag: pred.into(),
            support: self.support,
            uas: ratio(self.heads, self.support),
            las: ratio(self.labels, self.support),
        }
    }
}

/// Groups scored tokens by (gold tag, predicted tag) and reports UAS/LAS
/// per group, plus the split between correctly and wrongly tagged words.
pub fn pattern_table(gold: &[Sentence], preds: &[Prediction], exclude_punct: bool) -> Result<PatternTable> {
    check_alignment(gold, preds)?;
    let mut groups: BTreeMap<(String, String), Tally> = BTreeMap::new();
    let (mut right, mut wrong) = (Tally::default(), Tally::default());
    for (s, p) in gold.iter().zip(preds) {
        let (Some(tags), Some(heads)) = (&p.tags, &p.heads) else {
            return Err(Error::Validation("pattern table needs predicted tags and heads".into()));
        };
        for (i, t) in s.tokens.iter().enumerate() {
            let Some(gold_head) = t.head else { continue };
            if exclude_punct && t.is_punct {
                continue;
            }
            let gold_tag = t.tag.clone().unwrap_or_else(|| "_".into());
            let head_ok = gold_head == heads[i];
            let lab_ok = label_ok(s, p, i);
            let key = (gold_tag.clone(), tags[i].clone());
            for tally in [
                groups.entry(key).or_default(),
                if gold_tag == tags[i] { &mut right } else { &mut wrong },
            ] {
                tally.support += 1;
                tally.heads += head_ok as usize;
                tally.labels += lab_ok as usize;
            }
        }
    }
    Ok(PatternTable {
        rows: groups.iter().map(|((g, p), t)| t.row(g, p)).collect(),
        correct_tag: right.row("*", "=="),
        wrong_tag: wrong.row("*", "!="),
    })
}

impl PatternTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\tpredicted\tsupport\tUAS\tLAS\n");
        for r in self.rows.iter().chain([&self.correct_tag, &self.wrong_tag]) {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.2}\t{:.2}\n",
                r.gold_tag, r.pred_tag, r.support, r.uas, r.las
            ));
        }
        out
    }
}

/// Per-sentence counts, exposed for callers that aggregate differently.
pub fn counts(gold: &[Sentence], preds: &[Prediction], exclude_punct: bool) -> Result<Vec<Counts>> {
    check_alignment(gold, preds)?;
    Ok(gold
        .iter()
        .zip(preds)
        .map(|(s, p)| sentence_counts(s, p, exclude_punct))
        .collect())
}
