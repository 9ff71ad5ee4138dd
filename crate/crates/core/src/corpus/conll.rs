use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::tree::check_tree;
use super::{ColumnProfile, Prediction, PunctSet, Sentence, Source, Token, HETERO_FEATURE};
use crate::error::{Error, Result};

struct Layout {
    min_cols: usize,
    lemma: usize,
    tag: usize,
    feats: usize,
    head: usize,
    label: usize,
    pred: Option<(usize, usize, usize)>,
}

fn layout(profile: ColumnProfile) -> Layout {
    match profile {
        ColumnProfile::Conllx => Layout {
            min_cols: 8,
            lemma: 2,
            tag: 4,
            feats: 5,
            head: 6,
            label: 7,
            pred: None,
        },
        ColumnProfile::Conll09 => Layout {
            min_cols: 12,
            lemma: 2,
            tag: 4,
            feats: 7,
            head: 8,
            label: 10,
            pred: Some((5, 9, 11)),
        },
    }
}

fn opt(field: &str) -> Option<String> {
    (field != "_").then(|| field.to_string())
}

fn hetero_from_feats(feats: &str) -> Option<String> {
    feats
        .split('|')
        .find_map(|kv| kv.strip_prefix(HETERO_FEATURE)?.strip_prefix('='))
        .map(str::to_string)
}

fn feats_with_hetero(feats: &str, hetero: Option<&str>) -> String {
    let mut parts: Vec<String> = feats
        .split('|')
        .filter(|kv| !kv.is_empty() && *kv != "_" && !kv.starts_with(&format!("{}=", HETERO_FEATURE)))
        .map(str::to_string)
        .collect();
    if let Some(h) = hetero {
        parts.push(format!("{}={}", HETERO_FEATURE, h));
    }
    if parts.is_empty() {
        "_".into()
    } else {
        parts.join("|")
    }
}

/// Reads a treebank with the PTB punctuation set.
pub fn read_conll(path: &Path, profile: ColumnProfile) -> Result<Vec<Sentence>> {
    read_conll_with(path, profile, &PunctSet::ptb())
}

pub fn read_conll_with(path: &Path, profile: ColumnProfile, punct: &PunctSet) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conll(&text, path, profile, punct)
}

pub(crate) fn parse_conll(text: &str, path: &Path, profile: ColumnProfile, punct: &PunctSet) -> Result<Vec<Sentence>> {
    let lay = layout(profile);
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut start_line = 0;

    let finish = |tokens: &mut Vec<Token>, start_line: usize, sentences: &mut Vec<Sentence>| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let toks = std::mem::take(tokens);
        validate(&toks, sentences.len(), start_line, path)?;
        let mut s = Sentence {
            tokens: toks,
            source: Source::Treebank,
        };
        s.mark_punct(punct);
        sentences.push(s);
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut tokens, start_line, &mut sentences)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = if line.contains('\t') {
            line.split('\t').collect()
        } else {
            line.split_whitespace().collect()
        };
        if cols.len() < lay.min_cols {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected at least {} columns for {}, found {}",
                    lay.min_cols,
                    profile,
                    cols.len()
                ),
            ));
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad token id {:?}", cols[0])))?;
        if id != tokens.len() + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("token id {} out of sequence (expected {})", id, tokens.len() + 1),
            ));
        }
        if tokens.is_empty() {
            start_line = lineno;
        }
        let parse_head = |field: &str| -> Result<Option<usize>> {
            if field == "_" {
                return Ok(None);
            }
            field
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(path, lineno, format!("bad head {:?}", field)))
        };
        let mut tok = Token::new(cols[1]);
        tok.lemma = cols[lay.lemma].to_string();
        tok.feats = cols[lay.feats].to_string();
        tok.tag = opt(cols[lay.tag]);
        tok.hetero_tag = hetero_from_feats(cols[lay.feats]);
        tok.head = parse_head(cols[lay.head])?;
        tok.label = opt(cols[lay.label]);
        if let Some((ptag, phead, plabel)) = lay.pred {
            tok.pred_tag = opt(cols[ptag]);
            tok.pred_head = parse_head(cols[phead])?;
            tok.pred_label = opt(cols[plabel]);
        }
        tokens.push(tok);
    }
    finish(&mut tokens, start_line, &mut sentences)?;
    Ok(sentences)
}

fn validate(tokens: &[Token], index: usize, line: usize, path: &Path) -> Result<()> {
    let present = tokens.iter().filter(|t| t.head.is_some()).count();
    if present == 0 {
        return Ok(());
    }
    let describe = |msg: String| {
        Error::Validation(format!(
            "{}: sentence {} (line {}): {}",
            path.display(),
            index + 1,
            line,
            msg
        ))
    };
    if present != tokens.len() {
        return Err(describe("some tokens lack a head".into()));
    }
    let heads: Vec<usize> = tokens.iter().map(|t| t.head.unwrap()).collect();
    check_tree(&heads).map_err(|e| describe(e.to_string()))
}

/// Writes sentences with optional predictions. For CoNLL-X the predictions
/// replace the POS/HEAD/DEPREL columns; for CoNLL-2009 they go to
/// PPOS/PHEAD/PDEPREL and gold columns are kept. Heterogeneous tags are
/// stored as a `hetero=TAG` feature.
pub fn write_conll(
    path: &Path,
    sentences: &[Sentence],
    predictions: Option<&[Prediction]>,
    profile: ColumnProfile,
) -> Result<()> {
    if let Some(p) = predictions {
        if p.len() != sentences.len() {
            return Err(Error::Alignment(format!(
                "{} sentences but {} predictions",
                sentences.len(),
                p.len()
            )));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (si, s) in sentences.iter().enumerate() {
        let pred = predictions.map(|p| &p[si]);
        if let Some(p) = pred {
            check_prediction_lengths(p, s.len(), si)?;
        }
        for (i, t) in s.tokens.iter().enumerate() {
            let p_tag = pred.and_then(|p| p.tags.as_ref()).map(|v| v[i].as_str());
            let p_hetero = pred.and_then(|p| p.hetero_tags.as_ref()).map(|v| v[i].as_str());
            let p_head = pred.and_then(|p| p.heads.as_ref()).map(|v| v[i]);
            let p_label = pred.and_then(|p| p.labels.as_ref()).map(|v| v[i].as_str());
            let show = |x: Option<&str>| x.unwrap_or("_").to_string();
            let show_head = |x: Option<usize>| x.map_or("_".to_string(), |h| h.to_string());
            let hetero = p_hetero.or(t.hetero_tag.as_deref());
            let line = match profile {
                ColumnProfile::Conllx => {
                    let tag = show(p_tag.or(t.tag.as_deref()));
                    vec![
                        (i + 1).to_string(),
                        t.form.clone(),
                        t.lemma.clone(),
                        tag.clone(),
                        tag,
                        feats_with_hetero(&t.feats, hetero),
                        show_head(p_head.or(t.head)),
                        show(p_label.or(t.label.as_deref())),
                        "_".into(),
                        "_".into(),
                    ]
                }
                ColumnProfile::Conll09 => vec![
                    (i + 1).to_string(),
                    t.form.clone(),
                    t.lemma.clone(),
                    t.lemma.clone(),
                    show(t.tag.as_deref()),
                    show(p_tag.or(t.pred_tag.as_deref())),
                    t.feats.clone(),
                    feats_with_hetero("_", hetero),
                    show_head(t.head),
                    show_head(p_head.or(t.pred_head)),
                    show(t.label.as_deref()),
                    show(p_label.or(t.pred_label.as_deref())),
                    "_".into(),
                    "_".into(),
                ],
            };
            writeln!(w, "{}", line.join("\t")).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn check_prediction_lengths(p: &Prediction, n: usize, si: usize) -> Result<()> {
    let lens = [
        p.tags.as_ref().map(Vec::len),
        p.hetero_tags.as_ref().map(Vec::len),
        p.heads.as_ref().map(Vec::len),
        p.labels.as_ref().map(Vec::len),
    ];
    if lens.iter().flatten().any(|&l| l != n) {
        return Err(Error::Alignment(format!(
            "prediction for sentence {} does not match its {} tokens",
            si + 1,
            n
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, profile: ColumnProfile) -> Result<Vec<Sentence>> {
        parse_conll(text, Path::new("mem"), profile, &PunctSet::ptb())
    }

    #[test]
    fn minimal_two_token_file() {
        let s = parse("1 A _ X X _ 2 dep\n2 B _ Y Y _ 0 root\n", ColumnProfile::Conllx).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].heads().unwrap(), vec![2, 0]);
        assert_eq!(s[0].tokens[1].label.as_deref(), Some("root"));
    }

    #[test]
    fn gold_cycle_is_rejected() {
        let err = parse("1 A _ X X _ 2 dep\n2 B _ Y Y _ 1 dep\n", ColumnProfile::Conllx).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("sentence 1")), "{}", err);
    }

    #[test]
    fn multi_root_is_rejected() {
        let err = parse("1 A _ X X _ 0 root\n2 B _ Y Y _ 0 root\n", ColumnProfile::Conllx).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn head_out_of_range_is_validation_error() {
        let err = parse("1 A _ X X _ 3 dep\n2 B _ Y Y _ 0 root\n", ColumnProfile::Conllx).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn blank_separated_sentences_and_comments() {
        let text = "# c\n1 a _ X X _ 0 root\n\n\n1 b _ X X _ 0 root\n2 c _ X X _ 1 x\n\n# d\n1 d _ X X _ 0 root\n\n\n";
        let s = parse(text, ColumnProfile::Conllx).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].len(), 2);
    }

    #[test]
    fn short_line_reports_line_number() {
        let err = parse("1 a _ X X _ 0 root\n\n1 b _ X\n", ColumnProfile::Conllx).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn conll09_reads_gold_and_predicted_columns() {
        let line1 = "1\t中国\t_\t_\tNR\tNN\t_\t_\t2\t0\tSBJ\tROOT\t_\t_";
        let line2 = "2\t发展\t_\t_\tVV\tVV\t_\t_\t0\t1\tROOT\tOBJ\t_\t_";
        let s = parse(&format!("{}\n{}\n", line1, line2), ColumnProfile::Conll09).unwrap();
        let t = &s[0].tokens[0];
        assert_eq!(t.tag.as_deref(), Some("NR"));
        assert_eq!(t.pred_tag.as_deref(), Some("NN"));
        assert_eq!(t.head, Some(2));
        assert_eq!(t.pred_head, Some(0));
        assert_eq!(t.pred_label.as_deref(), Some("ROOT"));
    }

    #[test]
    fn punct_marked_from_gold_tag() {
        let s = parse("1 a _ NN NN _ 0 root\n2 . _ . . _ 1 punct\n", ColumnProfile::Conllx).unwrap();
        assert!(!s[0].tokens[0].is_punct);
        assert!(s[0].tokens[1].is_punct);
    }

    #[test]
    fn hetero_feature_roundtrip() {
        assert_eq!(hetero_from_feats("a=b|hetero=n"), Some("n".into()));
        assert_eq!(feats_with_hetero("a=b|hetero=v", Some("n")), "a=b|hetero=n");
        assert_eq!(feats_with_hetero("_", None), "_");
    }

    fn brute_force_is_tree(heads: &[usize]) -> bool {
        let n = heads.len();
        if heads.iter().enumerate().any(|(i, &h)| h > n || h == i + 1) {
            return false;
        }
        if heads.iter().filter(|&&h| h == 0).count() != 1 {
            return false;
        }
        (1..=n).all(|mut d| {
            for _ in 0..=n {
                if d == 0 {
                    return true;
                }
                d = heads[d - 1];
            }
            false
        })
    }

    fn render(heads: &[usize]) -> String {
        heads
            .iter()
            .enumerate()
            .map(|(i, h)| format!("{}\tw{}\t_\tX\tX\t_\t{}\tdep\n", i + 1, i, h))
            .collect()
    }

    proptest::proptest! {
        #[test]
        fn loader_accepts_exactly_trees(heads in proptest::collection::vec(0usize..8, 1..8)) {
            let n = heads.len();
            let heads: Vec<usize> = heads.into_iter().map(|h| h % (n + 1)).collect();
            let loaded = parse(&render(&heads), ColumnProfile::Conllx);
            proptest::prop_assert_eq!(loaded.is_ok(), brute_force_is_tree(&heads));
        }
    }

    #[test]
    fn write_read_roundtrip_both_profiles() {
        use crate::corpus::synthetic;
        use crate::rng::RngStream;
        let dir = tempfile::tempdir().unwrap();
        let sents = synthetic::treebank(10, &mut RngStream::new(4));
        let mut rng = RngStream::new(5);
        let preds: Vec<Prediction> = sents
            .iter()
            .map(|s| {
                let n = s.len();
                let mut heads = vec![0; n];
                let root = rng.below(n);
                for (i, h) in heads.iter_mut().enumerate() {
                    *h = if i == root { 0 } else { root + 1 };
                }
                Prediction {
                    tags: Some((0..n).map(|i| format!("P{}", (i + rng.below(3)) % 4)).collect()),
                    hetero_tags: Some(vec!["n".into(); n]),
                    heads: Some(heads),
                    labels: Some((0..n).map(|i| format!("l{}", i % 3)).collect()),
                }
            })
            .collect();
        for profile in [ColumnProfile::Conllx, ColumnProfile::Conll09] {
            let path = dir.path().join(format!("out.{}", profile));
            write_conll(&path, &sents, Some(&preds), profile).unwrap();
            let back = read_conll(&path, profile).unwrap();
            assert_eq!(back.len(), sents.len());
            for ((b, s), p) in back.iter().zip(&sents).zip(&preds) {
                assert_eq!(b.forms(), s.forms());
                assert_eq!(&Prediction::from_sentence(b, profile), p);
                if profile == ColumnProfile::Conll09 {
                    assert_eq!(b.heads(), s.heads());
                    assert_eq!(b.tokens.iter().map(|t| &t.tag).collect::<Vec<_>>(), s.tokens.iter().map(|t| &t.tag).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn conll09_predictions_land_in_p_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.conll09");
        let s = parse("1 A _ X X _ 2 dep\n2 B _ Y Y _ 0 root\n", ColumnProfile::Conllx).unwrap();
        let p = Prediction {
            tags: Some(vec!["P".into(), "Q".into()]),
            hetero_tags: None,
            heads: Some(vec![0, 1]),
            labels: Some(vec!["r".into(), "d".into()]),
        };
        write_conll(&path, &s, Some(&[p]), ColumnProfile::Conll09).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cols: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
        assert_eq!((cols[4], cols[5]), ("X", "P"));
        assert_eq!((cols[8], cols[9]), ("2", "0"));
        assert_eq!((cols[10], cols[11]), ("dep", "r"));
    }

    #[test]
    fn oov_form_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.conllx");
        let s = parse("1 Zyxwvut _ X X _ 0 root\n", ColumnProfile::Conllx).unwrap();
        write_conll(&path, &s, None, ColumnProfile::Conllx).unwrap();
        assert_eq!(read_conll(&path, ColumnProfile::Conllx).unwrap()[0].tokens[0].form, "Zyxwvut");
    }
}
