use rayon::prelude::*;

use crate::corpus::{Pretrained, Sentence};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::train::{predict_all, train, TrainConfig, TrainData};

use super::{Framework, ModelSpec};

/// Result of k-fold tagging with a structural record of which sentences
/// trained the model that tagged each fold.
#[derive(Clone, Debug)]
pub struct Jackknife {
    /// Input sentences with `pred_tag` set on every token.
    pub sentences: Vec<Sentence>,
    /// Sentence indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Indices each fold's tagger was trained (or dev-selected) on.
    pub training_sets: Vec<Vec<usize>>,
    /// Fold that tagged each sentence.
    pub tagged_by: Vec<usize>,
}

/// Deterministic partition of `0..n` into `k` folds of near-equal size.
pub fn jackknife_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("jackknifing needs k >= 2, got {}", k)));
    }
    if n < k {
        return Err(Error::Validation(format!(
            "cannot split {} sentences into {} folds",
            n, k
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngStream::new(seed).fork("jackknife").shuffle(&mut order);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Tags every sentence with a basic tagger trained on the other folds.
/// A tenth of each fold's training portion (at least one sentence) is held
/// out for model selection. Folds train in parallel.
pub fn jackknife_tags(
    treebank: &[Sentence],
    k: usize,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    pretrained: &Pretrained,
) -> Result<Jackknife> {
    let folds = jackknife_folds(treebank.len(), k, spec.seed)?;
    let mut tagger_spec = spec.clone();
    tagger_spec.framework = Framework::BasicTagger;
    tagger_spec.use_hetero = false;
    tagger_spec.pipeline_hetero_tags = false;
    tagger_spec.use_context_layers = false;

    let results: Vec<(Vec<usize>, Vec<Vec<String>>)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let rest: Vec<usize> = (0..treebank.len()).filter(|i| fold.binary_search(i).is_err()).collect();
            let dev_size = (rest.len() / 10).max(1).min(rest.len() - 1);
            let (train_idx, dev_idx) = rest.split_at(rest.len() - dev_size);
            let pick = |idx: &[usize]| idx.iter().map(|&i| treebank[i].clone()).collect::<Vec<_>>();
            let (train_set, dev_set, held_out) = (pick(train_idx), pick(dev_idx), pick(fold));
            let mut fold_spec = tagger_spec.clone();
            fold_spec.seed = RngStream::new(spec.seed).fork_index("fold", f as u64).seed();
            let outcome = train(
                &fold_spec,
                cfg,
                TrainData {
                    train: &train_set,
                    dev: &dev_set,
                    ..Default::default()
                },
                pretrained.clone(),
                None,
            )?;
            let preds = predict_all(&outcome.model, &held_out, None, cfg.decode)?;
            let tags = preds
                .into_iter()
                .map(|p| p.tags.ok_or_else(|| Error::Contract("tagger produced no tags".into())))
                .collect::<Result<Vec<_>>>()?;
            Ok((rest, tags))
        })
        .collect::<Result<_>>()?;

    let mut sentences = treebank.to_vec();
    let mut tagged_by = vec![usize::MAX; treebank.len()];
    let mut training_sets = Vec::with_capacity(k);
    for (f, (fold, (rest, tags))) in folds.iter().zip(results).enumerate() {
        for (&i, sent_tags) in fold.iter().zip(tags) {
            for (tok, tag) in sentences[i].tokens.iter_mut().zip(sent_tags) {
                tok.pred_tag = Some(tag);
            }
            tagged_by[i] = f;
        }
        training_sets.push(rest);
    }
    Ok(Jackknife {
        sentences,
        folds,
        training_sets,
        tagged_by,
    })
}
