use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Model architecture selector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Framework {
    BasicTagger,
    BasicParser,
    PipelineParser,
    ShareLoose,
    ShareTight,
    Stack,
}

impl Framework {
    pub const ALL: [Framework; 6] = [
        Framework::BasicTagger,
        Framework::BasicParser,
        Framework::PipelineParser,
        Framework::ShareLoose,
        Framework::ShareTight,
        Framework::Stack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Framework::BasicTagger => "basic-tagger",
            Framework::BasicParser => "basic-parser",
            Framework::PipelineParser => "pipeline-parser",
            Framework::ShareLoose => "share-loose",
            Framework::ShareTight => "share-tight",
            Framework::Stack => "stack",
        }
    }

    pub fn tags(self) -> bool {
        !matches!(self, Framework::BasicParser | Framework::PipelineParser)
    }

    pub fn parses(self) -> bool {
        self != Framework::BasicTagger
    }

    pub fn is_joint(self) -> bool {
        matches!(self, Framework::ShareLoose | Framework::ShareTight | Framework::Stack)
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Framework::ALL.iter().map(|f| f.name()).collect();
                Error::Config(format!("unknown framework {:?}; valid values: {}", s, valid.join(", ")))
            })
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub framework: Framework,
    /// Adds a heterogeneous-tag head (trained on a separate tag corpus).
    pub use_hetero: bool,
    /// Replaces the character encoder with a mix of external contextual layers.
    pub use_context_layers: bool,
    /// Pipeline parser also embeds heterogeneous tags.
    pub pipeline_hetero_tags: bool,
    pub word_dim: usize,
    pub tag_dim: usize,
    pub char_dim: usize,
    pub char_output: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub tag_mlp: usize,
    pub arc_mlp: usize,
    pub label_mlp: usize,
    pub embed_dropout: f64,
    pub lstm_input_dropout: f64,
    pub lstm_hidden_dropout: f64,
    pub mlp_dropout: f64,
    pub context_layers: usize,
    pub context_dim: usize,
    pub layer_dropout: f64,
    pub token_dropout: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            framework: Framework::BasicParser,
            use_hetero: false,
            use_context_layers: false,
            pipeline_hetero_tags: false,
            word_dim: 100,
            tag_dim: 100,
            char_dim: 50,
            char_output: 100,
            lstm_hidden: 400,
            lstm_layers: 3,
            tag_mlp: 200,
            arc_mlp: 500,
            label_mlp: 100,
            embed_dropout: 0.33,
            lstm_input_dropout: 0.33,
            lstm_hidden_dropout: 0.33,
            mlp_dropout: 0.33,
            context_layers: 12,
            context_dim: 768,
            layer_dropout: 0.1,
            token_dropout: 0.1,
            seed: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {:?} for {}", value, key)))
}

impl ModelSpec {
    pub fn new(framework: Framework) -> Self {
        ModelSpec {
            framework,
            ..Default::default()
        }
    }

    pub const KEYS: [&'static str; 22] = [
        "framework",
        "use_hetero",
        "use_context_layers",
        "pipeline_hetero_tags",
        "word_dim",
        "tag_dim",
        "char_dim",
        "char_output",
        "lstm_hidden",
        "lstm_layers",
        "tag_mlp",
        "arc_mlp",
        "label_mlp",
        "embed_dropout",
        "lstm_input_dropout",
        "lstm_hidden_dropout",
        "mlp_dropout",
        "context_layers",
        "context_dim",
        "layer_dropout",
        "token_dropout",
        "seed",
    ];

    /// Sets a field by key. Returns `Ok(false)` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "framework" => self.framework = value.parse()?,
            "use_hetero" => self.use_hetero = parse_value(key, value)?,
            "use_context_layers" => self.use_context_layers = parse_value(key, value)?,
            "pipeline_hetero_tags" => self.pipeline_hetero_tags = parse_value(key, value)?,
            "word_dim" => self.word_dim = parse_value(key, value)?,
            "tag_dim" => self.tag_dim = parse_value(key, value)?,
            "char_dim" => self.char_dim = parse_value(key, value)?,
            "char_output" => self.char_output = parse_value(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse_value(key, value)?,
            "lstm_layers" => self.lstm_layers = parse_value(key, value)?,
            "tag_mlp" => self.tag_mlp = parse_value(key, value)?,
            "arc_mlp" => self.arc_mlp = parse_value(key, value)?,
            "label_mlp" => self.label_mlp = parse_value(key, value)?,
            "embed_dropout" => self.embed_dropout = parse_value(key, value)?,
            "lstm_input_dropout" => self.lstm_input_dropout = parse_value(key, value)?,
            "lstm_hidden_dropout" => self.lstm_hidden_dropout = parse_value(key, value)?,
            "mlp_dropout" => self.mlp_dropout = parse_value(key, value)?,
            "context_layers" => self.context_layers = parse_value(key, value)?,
            "context_dim" => self.context_dim = parse_value(key, value)?,
            "layer_dropout" => self.layer_dropout = parse_value(key, value)?,
            "token_dropout" => self.token_dropout = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("framework", self.framework.to_string()),
            ("use_hetero", self.use_hetero.to_string()),
            ("use_context_layers", self.use_context_layers.to_string()),
            ("pipeline_hetero_tags", self.pipeline_hetero_tags.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("tag_dim", self.tag_dim.to_string()),
            ("char_dim", self.char_dim.to_string()),
            ("char_output", self.char_output.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("tag_mlp", self.tag_mlp.to_string()),
            ("arc_mlp", self.arc_mlp.to_string()),
            ("label_mlp", self.label_mlp.to_string()),
            ("embed_dropout", self.embed_dropout.to_string()),
            ("lstm_input_dropout", self.lstm_input_dropout.to_string()),
            ("lstm_hidden_dropout", self.lstm_hidden_dropout.to_string()),
            ("mlp_dropout", self.mlp_dropout.to_string()),
            ("context_layers", self.context_layers.to_string()),
            ("context_dim", self.context_dim.to_string()),
            ("layer_dropout", self.layer_dropout.to_string()),
            ("token_dropout", self.token_dropout.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{} = {}\n", k, v))
            .collect()
    }

    /// Parses `key = value` lines; unknown keys and missing `=` are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = ModelSpec::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got {:?}", line)))?;
            if !spec.set(k.trim(), v.trim())? {
                return Err(Error::Config(format!("unknown model key {:?}", k.trim())));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.framework;
        if self.use_hetero && !f.tags() {
            return Err(Error::Config(format!(
                "{} has no tagging component; use_hetero requires a tagger or joint framework",
                f
            )));
        }
        if self.pipeline_hetero_tags && f != Framework::PipelineParser {
            return Err(Error::Config(format!(
                "{} takes no tag inputs; pipeline_hetero_tags applies to pipeline-parser only",
                f
            )));
        }
        let dims = [
            ("word_dim", self.word_dim),
            ("tag_dim", self.tag_dim),
            ("char_dim", self.char_dim),
            ("char_output", self.char_output),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("tag_mlp", self.tag_mlp),
            ("arc_mlp", self.arc_mlp),
            ("label_mlp", self.label_mlp),
            ("context_layers", self.context_layers),
            ("context_dim", self.context_dim),
        ];
        if let Some((k, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{} must be positive", k)));
        }
        if self.char_output % 2 != 0 {
            return Err(Error::Config("char_output must be even".into()));
        }
        let rates = [
            ("embed_dropout", self.embed_dropout),
            ("lstm_input_dropout", self.lstm_input_dropout),
            ("lstm_hidden_dropout", self.lstm_hidden_dropout),
            ("mlp_dropout", self.mlp_dropout),
            ("layer_dropout", self.layer_dropout),
            ("token_dropout", self.token_dropout),
        ];
        if let Some((k, v)) = rates.iter().find(|(_, v)| !(0.0..1.0).contains(v)) {
            return Err(Error::Config(format!("{} must lie in [0, 1), got {}", k, v)));
        }
        Ok(())
    }

    /// Dropout rates all set to zero.
    pub fn without_dropout(mut self) -> Self {
        self.embed_dropout = 0.0;
        self.lstm_input_dropout = 0.0;
        self.lstm_hidden_dropout = 0.0;
        self.mlp_dropout = 0.0;
        self.layer_dropout = 0.0;
        self.token_dropout = 0.0;
        self
    }
}
