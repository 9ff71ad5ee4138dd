use crate::autodiff::{Graph, NodeId, ParamId, ParamStore, Reduction, Tensor};
use crate::corpus::{EncodedSentence, Prediction, Pretrained, Sentence, Vocab, OOV, ROOT};
use crate::decode::{assign_labels, decode_tags, decode_tree_greedy, decode_tree_mst, DecodeMode, ParseResult};
use crate::error::{Error, Result};
use crate::nn::{
    component_dropout, token_dropout, Activation, BiLstmStack, Biaffine, CharEncoder, Embedding, LayerAttention, Mlp,
    WordEmbedding, LEAKY_SLOPE,
};
use crate::rng::RngStream;

use super::loss::{arc_loss, label_loss, tag_loss};
use super::spec::{Framework, ModelSpec};

/// Which outputs a forward pass must produce.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct Tasks {
    pub tags: bool,
    pub hetero: bool,
    pub parse: bool,
}

impl Tasks {
    pub fn all() -> Self {
        Tasks {
            tags: true,
            hetero: true,
            parse: true,
        }
    }

    fn any(self) -> bool {
        self.tags || self.hetero || self.parse
    }
}

/// Graph nodes produced by a forward pass. Per-dependent outputs cover
/// tokens 1..=n; head-side outputs include the root row.
#[derive(Copy, Clone, Debug, Default)]
pub struct ForwardOut {
    /// `n × T`
    pub tag_logits: Option<NodeId>,
    /// `n × T'`
    pub hetero_logits: Option<NodeId>,
    /// `n × (n+1)`
    pub arc_scores: Option<NodeId>,
    /// `n × d_label`
    pub label_dep: Option<NodeId>,
    /// `(n+1) × d_label`
    pub label_head: Option<NodeId>,
    /// Tag-tower top-layer outputs `(n+1) × 2h`.
    pub tag_states: Option<NodeId>,
    /// Parse-tower top-layer outputs `(n+1) × 2h`.
    pub parse_states: Option<NodeId>,
}

/// Loss nodes for one batch. Components without supervision in the batch
/// are `None` and contribute nothing to `total`.
#[derive(Copy, Clone, Debug)]
pub struct BatchLoss {
    pub total: NodeId,
    pub dep: Option<NodeId>,
    pub pos: Option<NodeId>,
    pub hetero: Option<NodeId>,
}

/// Scalar values of a [`BatchLoss`]; absent components are exactly zero.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct LossValues {
    pub total: f64,
    pub dep: f64,
    pub pos: f64,
    pub hetero: f64,
}

impl BatchLoss {
    pub fn values(&self, g: &Graph) -> LossValues {
        let v = |n: Option<NodeId>| n.map_or(0.0, |n| g.value(n).item());
        LossValues {
            total: g.value(self.total).item(),
            dep: v(self.dep),
            pos: v(self.pos),
            hetero: v(self.hetero),
        }
    }
}

#[derive(Clone, Debug)]
struct ParserHeads {
    arc_dep: Mlp,
    arc_head: Mlp,
    label_dep: Mlp,
    label_head: Mlp,
    arc: Biaffine,
    label: Biaffine,
}

/// A tagger, parser or joint model with its parameters and vocabulary.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub vocab: Vocab,
    pub pretrained: Pretrained,
    pub store: ParamStore,
    words: WordEmbedding,
    chars: Option<CharEncoder>,
    tag_inputs: Option<Embedding>,
    hetero_inputs: Option<Embedding>,
    tag_attention: Option<LayerAttention>,
    parse_attention: Option<LayerAttention>,
    /// Tag tower; the single shared encoder for share-tight.
    tag_tower: Option<BiLstmStack>,
    parse_tower: Option<BiLstmStack>,
    tag_head: Option<Mlp>,
    hetero_head: Option<Mlp>,
    parser: Option<ParserHeads>,
}

/// Component a parameter belongs to, taken from its name prefix.
pub fn component_of(param_name: &str) -> &str {
    param_name.split('.').next().unwrap_or(param_name)
}

impl Model {
    pub fn new(spec: ModelSpec, vocab: Vocab, pretrained: Pretrained) -> Result<Self> {
        spec.validate()?;
        let f = spec.framework;
        if !pretrained.is_empty() && pretrained.dim != spec.word_dim {
            return Err(Error::Config(format!(
                "pretrained vectors have dimension {} but word_dim is {}",
                pretrained.dim, spec.word_dim
            )));
        }
        if f.tags() && vocab.tags.is_empty() {
            return Err(Error::Config(format!("{} needs tagged training data", f)));
        }
        if spec.use_hetero && vocab.hetero_tags.is_empty() {
            return Err(Error::Config("use_hetero needs heterogeneous tags in the training data".into()));
        }
        if f.parses() && vocab.labels.is_empty() {
            return Err(Error::Config(format!("{} needs labelled dependency trees", f)));
        }
        let root = RngStream::new(spec.seed).fork("init");
        let rng = |label: &str| root.fork(label);
        let mut store = ParamStore::new();

        let words = WordEmbedding::new(&mut store, "word", vocab.words.len(), spec.word_dim, pretrained.matrix())?;
        let (chars, tag_attention, parse_attention) = if spec.use_context_layers {
            let attn = |store: &mut ParamStore, name: &str| {
                LayerAttention::new(store, name, spec.context_layers, spec.layer_dropout)
            };
            let tag = f.tags().then(|| attn(&mut store, "attn_tag"));
            let parse = f.parses().then(|| attn(&mut store, "attn_parse"));
            (None, tag, parse)
        } else {
            let ce = CharEncoder::new(
                &mut store,
                "char",
                vocab.chars.len(),
                spec.char_dim,
                spec.char_output,
                &mut rng("char"),
            );
            (Some(ce), None, None)
        };
        let feature_dim = if spec.use_context_layers {
            spec.context_dim
        } else {
            spec.char_output
        };
        let base = spec.word_dim + feature_dim;
        let pipeline = f == Framework::PipelineParser;
        let tag_inputs = pipeline
            .then(|| Embedding::new(&mut store, "tag_input", vocab.tags.len() + 2, spec.tag_dim, &mut rng("tag_input")));
        let hetero_inputs = (pipeline && spec.pipeline_hetero_tags).then(|| {
            Embedding::new(
                &mut store,
                "hetero_input",
                vocab.hetero_tags.len() + 2,
                spec.tag_dim,
                &mut rng("hetero_input"),
            )
        });

        let tower = |store: &mut ParamStore, name: &str, input: usize| {
            BiLstmStack::new(
                store,
                name,
                input,
                spec.lstm_hidden,
                spec.lstm_layers,
                spec.lstm_input_dropout,
                spec.lstm_hidden_dropout,
                &mut root.fork(name),
            )
        };
        let (tag_tower, parse_tower) = match f {
            Framework::BasicTagger => (Some(tower(&mut store, "tag_tower", base)), None),
            Framework::BasicParser => (None, Some(tower(&mut store, "parse_tower", base))),
            Framework::PipelineParser => {
                let extra = spec.tag_dim * (1 + spec.pipeline_hetero_tags as usize);
                (None, Some(tower(&mut store, "parse_tower", base + extra)))
            }
            Framework::ShareLoose => (
                Some(tower(&mut store, "tag_tower", base)),
                Some(tower(&mut store, "parse_tower", base)),
            ),
            Framework::ShareTight => (Some(tower(&mut store, "shared_tower", base)), None),
            Framework::Stack => (
                Some(tower(&mut store, "tag_tower", base)),
                Some(tower(&mut store, "parse_tower", base + 2 * spec.lstm_hidden)),
            ),
        };
        let states = 2 * spec.lstm_hidden;
        let leaky = Activation::LeakyRelu(LEAKY_SLOPE);
        let mlp = |store: &mut ParamStore, name: &str, layers: &[(usize, Activation)]| {
            Mlp::new(store, name, states, layers, spec.mlp_dropout, &mut root.fork(name))
        };
        let tag_head = f
            .tags()
            .then(|| mlp(&mut store, "tag_mlp", &[(spec.tag_mlp, leaky), (vocab.tags.len(), Activation::Linear)]));
        let hetero_head = spec.use_hetero.then(|| {
            mlp(
                &mut store,
                "hetero_mlp",
                &[(spec.tag_mlp, leaky), (vocab.hetero_tags.len(), Activation::Linear)],
            )
        });
        let parser = f.parses().then(|| ParserHeads {
            arc_dep: mlp(&mut store, "arc_dep", &[(spec.arc_mlp, leaky)]),
            arc_head: mlp(&mut store, "arc_head", &[(spec.arc_mlp, leaky)]),
            label_dep: mlp(&mut store, "label_dep", &[(spec.label_mlp, leaky)]),
            label_head: mlp(&mut store, "label_head", &[(spec.label_mlp, leaky)]),
            arc: Biaffine::new(&mut store, "arc_biaffine", spec.arc_mlp, spec.arc_mlp, 1, &mut rng("arc_biaffine")),
            label: Biaffine::new(
                &mut store,
                "label_biaffine",
                spec.label_mlp,
                spec.label_mlp,
                vocab.labels.len(),
                &mut rng("label_biaffine"),
            ),
        });
        Ok(Model {
            spec,
            vocab,
            pretrained,
            store,
            words,
            chars,
            tag_inputs,
            hetero_inputs,
            tag_attention,
            parse_attention,
            tag_tower,
            parse_tower,
            tag_head,
            hetero_head,
            parser,
        })
    }

    pub fn framework(&self) -> Framework {
        self.spec.framework
    }

    /// Trainable parameters grouped by component name.
    pub fn components(&self) -> Vec<(String, ParamId)> {
        self.store
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(id, p)| (component_of(&p.name).to_string(), id))
            .collect()
    }

    /// Input width of the parse tower (or of the shared tower).
    pub fn parser_input_dim(&self) -> Option<usize> {
        match self.framework() {
            Framework::ShareTight => self.tag_tower.as_ref().map(|t| t.input_dim()),
            _ => self.parse_tower.as_ref().map(|t| t.input_dim()),
        }
    }

    /// Tasks this model has heads for.
    pub fn tasks(&self) -> Tasks {
        Tasks {
            tags: self.tag_head.is_some(),
            hetero: self.hetero_head.is_some(),
            parse: self.parser.is_some(),
        }
    }

    /// Resolves a sentence against the model's vocabulary and pretrained
    /// table. Pipeline parsers require tag inputs on every token.
    pub fn encode(&self, s: &Sentence) -> Result<EncodedSentence> {
        if self.framework() == Framework::PipelineParser && s.source == crate::corpus::Source::Treebank {
            if let Some(t) = s.tokens.iter().find(|t| t.input_tag().is_none()) {
                return Err(Error::Config(format!(
                    "pipeline-parser requires a POS tag on every token; {:?} has none",
                    t.form
                )));
            }
            if self.spec.pipeline_hetero_tags {
                if let Some(t) = s.tokens.iter().find(|t| t.hetero_tag.is_none()) {
                    return Err(Error::Config(format!(
                        "pipeline-parser with heterogeneous tag inputs requires them on every token; {:?} has none",
                        t.form
                    )));
                }
            }
        }
        let lookup = |form: &str| self.pretrained.lookup(form);
        self.vocab.encode(s, Some(&lookup))
    }

    fn padded_context(&self, context: Option<&Tensor>, n: usize) -> Result<Tensor> {
        let ctx = context.ok_or_else(|| Error::Config("model expects contextual layers for every sentence".into()))?;
        let (l, d) = (self.spec.context_layers, self.spec.context_dim);
        if ctx.shape() != [l, n, d] {
            return Err(Error::Shape(format!(
                "contextual layers {:?} do not match [{}, {}, {}]",
                ctx.shape(),
                l,
                n,
                d
            )));
        }
        let mut data = vec![0.0; l * (n + 1) * d];
        for layer in 0..l {
            let src = &ctx.data()[layer * n * d..(layer + 1) * n * d];
            let start = layer * (n + 1) * d + d;
            data[start..start + n * d].copy_from_slice(src);
        }
        Tensor::new(vec![l, n + 1, d], data)
    }

    /// Runs the encoder and the requested heads.
    pub fn forward(
        &self,
        g: &mut Graph,
        s: &EncodedSentence,
        context: Option<&Tensor>,
        tasks: Tasks,
        train: bool,
        rng: &mut RngStream,
    ) -> Result<ForwardOut> {
        let mut out = ForwardOut::default();
        let tasks = Tasks {
            tags: tasks.tags && self.tag_head.is_some(),
            hetero: tasks.hetero && self.hetero_head.is_some(),
            parse: tasks.parse && self.parser.is_some(),
        };
        if !tasks.any() {
            return Ok(out);
        }
        let n = s.len();
        let store = &self.store;
        let f = self.framework();

        let mut word_ids = s.words.clone();
        if train && self.spec.use_context_layers && self.spec.token_dropout > 0.0 {
            let dropped = token_dropout(&word_ids[1..], self.spec.token_dropout, OOV, rng)?;
            word_ids = std::iter::once(ROOT).chain(dropped).collect();
        }
        let e_w = self.words.embed(g, store, &word_ids, &s.pretrained)?;
        let e_c = match &self.chars {
            Some(ce) => {
                let refs: Vec<&[usize]> = s.chars.iter().map(Vec::as_slice).collect();
                Some(ce.encode_words(g, store, &refs)?)
            }
            None => None,
        };
        let padded = if self.spec.use_context_layers {
            Some(self.padded_context(context, n)?)
        } else {
            None
        };
        let input = |g: &mut Graph, attention: Option<&LayerAttention>, extra: &[NodeId], rng: &mut RngStream| -> Result<NodeId> {
            let feature = match (e_c, attention, &padded) {
                (Some(c), _, _) => c,
                (None, Some(attn), Some(layers)) => attn.forward(g, store, layers, train, rng)?.output,
                _ => return Err(Error::Contract("model has neither character encoder nor layer attention".into())),
            };
            let mut parts = vec![e_w, feature];
            parts.extend_from_slice(extra);
            if train && self.spec.embed_dropout > 0.0 {
                parts = component_dropout(g, &parts, self.spec.embed_dropout, rng)?;
            }
            g.concat(&parts)
        };

        let need_tag_states = tasks.tags || tasks.hetero || (tasks.parse && f == Framework::Stack);
        let tag_states = if need_tag_states || (f == Framework::ShareTight && !self.spec.use_context_layers) {
            match &self.tag_tower {
                Some(tower) => {
                    let x = input(g, self.tag_attention.as_ref(), &[], rng)?;
                    Some(tower.run(g, store, x, train, rng)?)
                }
                None => None,
            }
        } else {
            None
        };
        out.tag_states = tag_states;

        if tasks.parse {
            let h = match f {
                Framework::ShareTight => {
                    if self.spec.use_context_layers {
                        let x = input(g, self.parse_attention.as_ref(), &[], rng)?;
                        self.tag_tower.as_ref().expect("shared tower").run(g, store, x, train, rng)?
                    } else {
                        tag_states.expect("shared states")
                    }
                }
                Framework::Stack => {
                    let x = input(g, self.parse_attention.as_ref(), &[], rng)?;
                    let x = g.concat(&[x, tag_states.expect("tag tower states")])?;
                    self.parse_tower.as_ref().expect("parse tower").run(g, store, x, train, rng)?
                }
                Framework::PipelineParser => {
                    let mut extra = vec![self.tag_inputs.as_ref().expect("tag inputs").lookup(g, store, &s.input_tags)?];
                    if let Some(h) = &self.hetero_inputs {
                        extra.push(h.lookup(g, store, &s.input_hetero_tags)?);
                    }
                    let x = input(g, self.parse_attention.as_ref(), &extra, rng)?;
                    self.parse_tower.as_ref().expect("parse tower").run(g, store, x, train, rng)?
                }
                _ => {
                    let x = input(g, self.parse_attention.as_ref(), &[], rng)?;
                    self.parse_tower.as_ref().expect("parse tower").run(g, store, x, train, rng)?
                }
            };
            out.parse_states = Some(h);
            let p = self.parser.as_ref().expect("parser heads");
            let deps = g.slice_rows(h, 1, n)?;
            let arc_dep = p.arc_dep.forward(g, store, deps, train, rng)?;
            let arc_head = p.arc_head.forward(g, store, h, train, rng)?;
            out.arc_scores = Some(p.arc.arc_scores(g, store, arc_dep, arc_head)?);
            out.label_dep = Some(p.label_dep.forward(g, store, deps, train, rng)?);
            out.label_head = Some(p.label_head.forward(g, store, h, train, rng)?);
        }

        if tasks.tags || tasks.hetero {
            let h = tag_states.expect("tag states");
            let tokens = g.slice_rows(h, 1, n)?;
            if tasks.tags {
                out.tag_logits = Some(self.tag_head.as_ref().expect("tag head").forward(g, store, tokens, train, rng)?);
            }
            if tasks.hetero {
                let head = self.hetero_head.as_ref().expect("hetero head");
                out.hetero_logits = Some(head.forward(g, store, tokens, train, rng)?);
            }
        }
        Ok(out)
    }

    /// Supervision a sentence carries that this model can use.
    pub fn supervision(&self, s: &EncodedSentence) -> Tasks {
        Tasks {
            tags: self.tag_head.is_some() && s.tags.is_some(),
            hetero: self.hetero_head.is_some() && s.hetero_tags.is_some(),
            parse: self.parser.is_some() && s.heads.is_some() && s.labels.is_some(),
        }
    }

    /// `L = L_DEP + L_POS + L_POS′`, each term averaged over the tokens in
    /// the batch that carry its supervision.
    pub fn batch_loss(
        &self,
        g: &mut Graph,
        batch: &[(&EncodedSentence, Option<&Tensor>)],
        train: bool,
        rng: &mut RngStream,
    ) -> Result<BatchLoss> {
        #[derive(Default)]
        struct Acc {
            sum: Option<NodeId>,
            count: usize,
        }
        impl Acc {
            fn push(&mut self, g: &mut Graph, node: NodeId, count: usize) -> Result<()> {
                self.sum = Some(match self.sum {
                    Some(s) => g.add(s, node)?,
                    None => node,
                });
                self.count += count;
                Ok(())
            }

            fn mean(&self, g: &mut Graph) -> Option<NodeId> {
                self.sum.map(|s| g.scalar_mul(s, 1.0 / self.count as f64))
            }
        }
        let (mut arcs, mut labels, mut pos, mut hetero) = (Acc::default(), Acc::default(), Acc::default(), Acc::default());
        for (s, ctx) in batch {
            let tasks = self.supervision(s);
            if !tasks.any() {
                continue;
            }
            let out = self.forward(g, s, *ctx, tasks, train, rng)?;
            let n = s.len();
            if tasks.parse {
                let heads = s.heads.as_ref().expect("gold heads");
                let gold_labels = s.labels.as_ref().expect("gold labels");
                let a = arc_loss(g, out.arc_scores.expect("arc scores"), heads, Reduction::Sum)?;
                arcs.push(g, a, n)?;
                let p = self.parser.as_ref().expect("parser heads");
                let at_gold = p.label.scores_at(
                    g,
                    &self.store,
                    out.label_dep.expect("label dep"),
                    out.label_head.expect("label head"),
                    heads,
                )?;
                let l = label_loss(g, at_gold, gold_labels, Reduction::Sum)?;
                labels.push(g, l, n)?;
            }
            if tasks.tags {
                let t = tag_loss(g, out.tag_logits.expect("tag logits"), s.tags.as_ref().expect("tags"), Reduction::Sum)?;
                pos.push(g, t, n)?;
            }
            if tasks.hetero {
                let gold = s.hetero_tags.as_ref().expect("hetero tags");
                let t = tag_loss(g, out.hetero_logits.expect("hetero logits"), gold, Reduction::Sum)?;
                hetero.push(g, t, n)?;
            }
        }
        let dep = match (arcs.mean(g), labels.mean(g)) {
            (Some(a), Some(l)) => Some(g.add(a, l)?),
            _ => None,
        };
        let pos = pos.mean(g);
        let hetero = hetero.mean(g);
        let mut total: Option<NodeId> = None;
        for part in [dep, pos, hetero].into_iter().flatten() {
            total = Some(match total {
                Some(t) => g.add(t, part)?,
                None => part,
            });
        }
        let total = match total {
            Some(t) => t,
            None => g.constant(Tensor::scalar(0.0)),
        };
        Ok(BatchLoss {
            total,
            dep,
            pos,
            hetero,
        })
    }

    /// Eval-mode prediction for every head the model has.
    pub fn predict(&self, s: &EncodedSentence, context: Option<&Tensor>, mode: DecodeMode) -> Result<ParseResult> {
        let mut g = Graph::new();
        let mut rng = RngStream::new(0);
        let out = self.forward(&mut g, s, context, Tasks::all(), false, &mut rng)?;
        let mut result = ParseResult {
            tags: out.tag_logits.map(|t| decode_tags(g.value(t))),
            hetero_tags: out.hetero_logits.map(|t| decode_tags(g.value(t))),
            ..Default::default()
        };
        if let Some(arcs) = out.arc_scores {
            let scores = g.value(arcs).clone();
            let heads = match mode {
                DecodeMode::Mst => decode_tree_mst(&scores)?,
                DecodeMode::Greedy => decode_tree_greedy(&scores),
            };
            let p = self.parser.as_ref().expect("parser heads");
            let all = p.label.all_scores(
                &self.store,
                g.value(out.label_dep.expect("label dep")),
                g.value(out.label_head.expect("label head")),
            )?;
            result.labels = Some(assign_labels(&all, &heads)?);
            result.heads = Some(heads);
            result.arc_scores = Some(scores);
        }
        Ok(result)
    }

    /// Maps ids in a [`ParseResult`] back to strings.
    pub fn to_prediction(&self, r: &ParseResult) -> Prediction {
        let strings = |ids: &Option<Vec<usize>>, index: &crate::corpus::Index| {
            ids.as_ref().map(|v| v.iter().map(|&i| index.item(i).to_string()).collect())
        };
        Prediction {
            tags: strings(&r.tags, &self.vocab.tags),
            hetero_tags: strings(&r.hetero_tags, &self.vocab.hetero_tags),
            heads: r.heads.clone(),
            labels: strings(&r.labels, &self.vocab.labels),
        }
    }

    /// Encodes and predicts a sentence, returning string-level output.
    pub fn predict_sentence(&self, s: &Sentence, context: Option<&Tensor>, mode: DecodeMode) -> Result<Prediction> {
        let enc = self.encode(s)?;
        Ok(self.to_prediction(&self.predict(&enc, context, mode)?))
    }
}
