use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::eval::{evaluate, EvalReport};
use super::optim::Adam;
use crate::autodiff::{Graph, Tensor};
use crate::corpus::{EncodedSentence, Prediction, Pretrained, Sentence, Vocab};
use crate::decode::DecodeMode;
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::nn::ContextLayers;
use crate::rng::RngStream;

/// Optimisation and stopping settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_decay: f64,
    pub decay_steps: usize,
    pub clip: f64,
    pub batch_tokens: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; `None` uses 100, or
    /// 50 with contextual layers.
    pub patience: Option<usize>,
    /// Heterogeneous batches per treebank batch.
    pub hetero_ratio: usize,
    pub decode: DecodeMode,
    pub exclude_punct: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-3,
            beta1: 0.9,
            beta2: 0.9,
            eps: 1e-12,
            lr_decay: 0.75,
            decay_steps: 5000,
            clip: 5.0,
            batch_tokens: 5000,
            max_epochs: 1000,
            patience: None,
            hetero_ratio: 1,
            decode: DecodeMode::Mst,
            exclude_punct: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {:?} for {}", value, key)))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 13] = [
        "lr",
        "beta1",
        "beta2",
        "eps",
        "lr_decay",
        "decay_steps",
        "clip",
        "batch_tokens",
        "max_epochs",
        "patience",
        "hetero_ratio",
        "decode",
        "punct_exclude",
    ];

    /// Sets a field by key. Returns `Ok(false)` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "lr" => self.lr = parse_value(key, value)?,
            "beta1" => self.beta1 = parse_value(key, value)?,
            "beta2" => self.beta2 = parse_value(key, value)?,
            "eps" => self.eps = parse_value(key, value)?,
            "lr_decay" => self.lr_decay = parse_value(key, value)?,
            "decay_steps" => self.decay_steps = parse_value(key, value)?,
            "clip" => self.clip = parse_value(key, value)?,
            "batch_tokens" => self.batch_tokens = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => {
                self.patience = match value {
                    "auto" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "hetero_ratio" => self.hetero_ratio = parse_value(key, value)?,
            "decode" => self.decode = value.parse()?,
            "punct_exclude" => self.exclude_punct = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lr", self.lr.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps", self.eps.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("decay_steps", self.decay_steps.to_string()),
            ("clip", self.clip.to_string()),
            ("batch_tokens", self.batch_tokens.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.map_or("auto".into(), |p| p.to_string())),
            ("hetero_ratio", self.hetero_ratio.to_string()),
            ("decode", self.decode.to_string()),
            ("punct_exclude", self.exclude_punct.to_string()),
        ]
    }

    pub fn effective_patience(&self, spec: &ModelSpec) -> usize {
        self.patience
            .unwrap_or(if spec.use_context_layers { 50 } else { 100 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_tokens == 0 || self.max_epochs == 0 || self.decay_steps == 0 {
            return Err(Error::Config(
                "batch_tokens, max_epochs and decay_steps must be positive".into(),
            ));
        }
        if self.lr <= 0.0 || self.clip <= 0.0 {
            return Err(Error::Config("lr and clip must be positive".into()));
        }
        Ok(())
    }
}

/// Training inputs. Contextual layers, when the model uses them, must
/// cover the corresponding sentence list.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainData<'a> {
    pub train: &'a [Sentence],
    pub dev: &'a [Sentence],
    pub hetero: &'a [Sentence],
    pub train_context: Option<&'a ContextLayers>,
    pub dev_context: Option<&'a ContextLayers>,
    pub hetero_context: Option<&'a ContextLayers>,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub loss_dep: f64,
    pub loss_pos: f64,
    pub loss_hetero: f64,
    pub dev: EvalReport,
    pub seconds: f64,
}

impl EpochRecord {
    /// `key=value` fields separated by spaces; `seconds` only when `timing`.
    pub fn to_line(&self, timing: bool) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.4}", v));
        let mut line = format!(
            "epoch={} steps={} loss_dep={:.6} loss_pos={:.6} loss_pos_hetero={:.6} dev_ta={} dev_hetero_ta={} dev_uas={} dev_las={}",
            self.epoch,
            self.steps,
            self.loss_dep,
            self.loss_pos,
            self.loss_hetero,
            opt(self.dev.ta),
            opt(self.dev.hetero_ta),
            opt(self.dev.uas),
            opt(self.dev.las)
        );
        if timing {
            line.push_str(&format!(" seconds={:.3}", self.seconds));
        }
        line
    }
}

pub struct TrainOutcome {
    /// Parameters restored to the best dev epoch.
    pub model: Model,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best: EvalReport,
}

fn contexts<'a>(layers: Option<&'a ContextLayers>, count: usize, needed: bool) -> Result<Vec<Option<&'a Tensor>>> {
    match (needed, layers) {
        (false, _) => Ok(vec![None; count]),
        (true, Some(c)) if c.sentences.len() == count => Ok(c.sentences.iter().map(Some).collect()),
        (true, Some(c)) => Err(Error::Alignment(format!(
            "contextual layers cover {} sentences, corpus has {}",
            c.sentences.len(),
            count
        ))),
        (true, None) => Err(Error::Config("use_context_layers is set but no contextual layers were given".into())),
    }
}

/// Tracks the best dev score and decides when to stop.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<(usize, (f64, f64))>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| b.0)
    }

    /// Records an epoch's dev key. Returns `(improved, stop)`.
    pub fn update(&mut self, epoch: usize, key: (f64, f64)) -> (bool, bool) {
        let improved = self.best.is_none_or(|(_, b)| key > b);
        if improved {
            self.best = Some((epoch, key));
        }
        let best_epoch = self.best.map_or(epoch, |b| b.0);
        (improved, epoch - best_epoch >= self.patience)
    }
}

/// Splits `order` into consecutive batches of at most `max_tokens` tokens
/// (a longer single sentence forms its own batch).
pub fn make_batches(order: &[usize], lengths: &[usize], max_tokens: usize) -> Vec<Vec<usize>> {
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut tokens = 0;
    for &i in order {
        if !current.is_empty() && tokens + lengths[i] > max_tokens {
            batches.push(std::mem::take(&mut current));
            tokens = 0;
        }
        current.push(i);
        tokens += lengths[i];
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

/// Which corpus a batch draws from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BatchSource {
    Treebank,
    Hetero,
}

/// Interleaves treebank and heterogeneous batches: `ratio` hetero batches
/// after each treebank batch, leftovers appended at the end.
pub fn interleave(treebank: Vec<Vec<usize>>, hetero: Vec<Vec<usize>>, ratio: usize) -> Vec<(BatchSource, Vec<usize>)> {
    let mut out = Vec::with_capacity(treebank.len() + hetero.len());
    let mut h = hetero.into_iter();
    for b in treebank {
        out.push((BatchSource::Treebank, b));
        for _ in 0..ratio {
            if let Some(x) = h.next() {
                out.push((BatchSource::Hetero, x));
            }
        }
    }
    out.extend(h.map(|x| (BatchSource::Hetero, x)));
    out
}

/// Predicts every sentence in parallel (order preserved).
pub fn predict_all(
    model: &Model,
    sentences: &[Sentence],
    context: Option<&ContextLayers>,
    mode: DecodeMode,
) -> Result<Vec<Prediction>> {
    let ctx = contexts(context, sentences.len(), model.spec.use_context_layers)?;
    sentences
        .par_iter()
        .zip(ctx.par_iter())
        .map(|(s, c)| model.predict_sentence(s, *c, mode))
        .collect()
}

/// Evaluates `model` on gold sentences.
pub fn evaluate_model(
    model: &Model,
    gold: &[Sentence],
    context: Option<&ContextLayers>,
    mode: DecodeMode,
    exclude_punct: bool,
) -> Result<EvalReport> {
    let preds = predict_all(model, gold, context, mode)?;
    let mut report = evaluate(gold, &preds, exclude_punct)?;
    if model.spec.framework.parses() {
        report.decode = Some(mode);
    }
    Ok(report)
}

/// Trains a model from scratch: builds the vocabulary, runs epochs over
/// shuffled batches, evaluates on dev after each epoch, keeps the best
/// parameters and stops when dev stops improving for `patience` epochs.
pub fn train(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    data: TrainData<'_>,
    pretrained: Pretrained,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if data.train.is_empty() || data.dev.is_empty() {
        return Err(Error::Validation("training and dev sets must be nonempty".into()));
    }
    let hetero = if spec.use_hetero { data.hetero } else { &[] };
    let vocab = Vocab::build(data.train, hetero)?;
    let mut model = Model::new(spec.clone(), vocab, pretrained)?;

    let ctx_needed = spec.use_context_layers;
    let train_ctx = contexts(data.train_context, data.train.len(), ctx_needed)?;
    let hetero_ctx = contexts(data.hetero_context, hetero.len(), ctx_needed)?;
    contexts(data.dev_context, data.dev.len(), ctx_needed)?;
    let encoded: Vec<EncodedSentence> = data.train.iter().map(|s| model.encode(s)).collect::<Result<_>>()?;
    let encoded_hetero: Vec<EncodedSentence> = hetero.iter().map(|s| model.encode(s)).collect::<Result<_>>()?;
    let lengths: Vec<usize> = encoded.iter().map(|s| s.len()).collect();
    let hetero_lengths: Vec<usize> = encoded_hetero.iter().map(|s| s.len()).collect();

    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        .with_decay(cfg.lr_decay, cfg.decay_steps)
        .with_clip(cfg.clip);
    let patience = cfg.effective_patience(spec);
    let base = RngStream::new(spec.seed).fork("train");
    let mut records = Vec::new();
    let mut stopper = EarlyStopping::new(patience);
    let mut best: Option<(usize, EvalReport, Vec<Tensor>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut rng = base.fork_index("epoch", epoch as u64);
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        rng.shuffle(&mut order);
        let tb_batches = make_batches(&order, &lengths, cfg.batch_tokens);
        let het_batches = if encoded_hetero.is_empty() {
            Vec::new()
        } else {
            let mut h: Vec<usize> = (0..encoded_hetero.len()).collect();
            rng.shuffle(&mut h);
            h.truncate((encoded.len() * cfg.hetero_ratio).max(1));
            make_batches(&h, &hetero_lengths, cfg.batch_tokens)
        };
        let schedule = interleave(tb_batches, het_batches, cfg.hetero_ratio);

        let (mut dep, mut pos, mut het) = ((0.0, 0), (0.0, 0), (0.0, 0));
        let mut steps = 0;
        for (source, batch) in schedule {
            let items: Vec<(&EncodedSentence, Option<&Tensor>)> = batch
                .iter()
                .map(|&i| match source {
                    BatchSource::Treebank => (&encoded[i], train_ctx[i]),
                    BatchSource::Hetero => (&encoded_hetero[i], hetero_ctx[i]),
                })
                .collect();
            let mut g = Graph::new();
            let loss = model.batch_loss(&mut g, &items, true, &mut rng)?;
            let values = loss.values(&g);
            if !values.total.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss became {} at epoch {}, step {}",
                    values.total,
                    epoch,
                    adam.steps() + 1
                )));
            }
            if loss.dep.is_none() && loss.pos.is_none() && loss.hetero.is_none() {
                continue;
            }
            for (acc, part, v) in [
                (&mut dep, loss.dep, values.dep),
                (&mut pos, loss.pos, values.pos),
                (&mut het, loss.hetero, values.hetero),
            ] {
                if part.is_some() {
                    acc.0 += v;
                    acc.1 += 1;
                }
            }
            g.backward(loss.total)?;
            g.accumulate_param_grads(&mut model.store);
            adam.step(&mut model.store);
            model.store.zero_grads();
            steps += 1;
        }
        let mean = |(s, c): (f64, usize)| if c == 0 { 0.0 } else { s / c as f64 };
        let dev = evaluate_model(&model, data.dev, data.dev_context, cfg.decode, cfg.exclude_punct)?;
        let record = EpochRecord {
            epoch,
            steps,
            loss_dep: mean(dep),
            loss_pos: mean(pos),
            loss_hetero: mean(het),
            dev: dev.clone(),
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{}", record.to_line(true)).map_err(|e| Error::io("training log", e))?;
        }
        log::info!("{}", record.to_line(true));
        records.push(record);
        let (improved, stop) = stopper.update(epoch, dev.selection_key());
        if improved {
            best = Some((epoch, dev, model.store.snapshot()));
        }
        if stop {
            log::info!("no dev improvement for {} epochs; stopping", patience);
            break;
        }
    }
    let (best_epoch, best_report, snapshot) = best.expect("at least one epoch");
    model.store.restore(&snapshot);
    Ok(TrainOutcome {
        model,
        records,
        best_epoch,
        best: best_report,
    })
}
