use std::fs;
use std::path::{Path, PathBuf};

use jointdep::corpus::{ColumnProfile, PunctSet};
use jointdep::models::ModelSpec;
use jointdep::train::TrainConfig;

/// Run-level settings for every subcommand. Settings come from an optional
/// `key = value` file, then from flags; later values win.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub hetero: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    pub train_context: Option<PathBuf>,
    pub dev_context: Option<PathBuf>,
    pub hetero_context: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub profile: ColumnProfile,
    pub punct_tags: PunctSet,
    pub spec: ModelSpec,
    pub train_cfg: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: None,
            dev: None,
            hetero: None,
            pretrained: None,
            train_context: None,
            dev_context: None,
            hetero_context: None,
            out: None,
            profile: ColumnProfile::Conllx,
            punct_tags: PunctSet::ptb(),
            spec: ModelSpec::default(),
            train_cfg: TrainConfig::default(),
        }
    }
}

/// Parses `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value, got {:?}", origin, no + 1, line))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {}", path.display(), e))?;
    parse_pairs(&text, &path.display().to_string())
}

/// `KEY=VALUE` from a `--set` flag.
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {:?}", s))
}

const PATH_KEYS: [&str; 8] = [
    "train",
    "dev",
    "hetero",
    "pretrained",
    "train_context",
    "dev_context",
    "hetero_context",
    "out",
];

impl RunConfig {
    fn path_slot(&mut self, key: &str) -> Option<&mut Option<PathBuf>> {
        Some(match key {
            "train" => &mut self.train,
            "dev" => &mut self.dev,
            "hetero" => &mut self.hetero,
            "pretrained" => &mut self.pretrained,
            "train_context" => &mut self.train_context,
            "dev_context" => &mut self.dev_context,
            "hetero_context" => &mut self.hetero_context,
            "out" => &mut self.out,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if let Some(slot) = self.path_slot(key) {
            *slot = Some(PathBuf::from(value));
            return Ok(());
        }
        match key {
            "profile" => {
                self.profile = value.parse().map_err(|e: jointdep::Error| e.to_string())?;
                return Ok(());
            }
            "punct_tags" => {
                self.punct_tags = PunctSet::from_tags(value.split_whitespace());
                return Ok(());
            }
            _ => {}
        }
        if self.spec.set(key, value).map_err(|e| e.to_string())? {
            return Ok(());
        }
        if self.train_cfg.set(key, value).map_err(|e| e.to_string())? {
            return Ok(());
        }
        Err(format!("unknown setting {:?}", key))
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), String> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    /// Every setting as `key = value` lines, in a form [`RunConfig::apply`]
    /// reproduces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in PATH_KEYS {
            let path = match key {
                "train" => &self.train,
                "dev" => &self.dev,
                "hetero" => &self.hetero,
                "pretrained" => &self.pretrained,
                "train_context" => &self.train_context,
                "dev_context" => &self.dev_context,
                "hetero_context" => &self.hetero_context,
                _ => &self.out,
            };
            if let Some(p) = path {
                out.push_str(&format!("{} = {}\n", key, p.display()));
            }
        }
        out.push_str(&format!("profile = {}\n", self.profile));
        let tags: Vec<&str> = self.punct_tags.tags().collect();
        out.push_str(&format!("punct_tags = {}\n", tags.join(" ")));
        for (k, v) in self.spec.pairs().into_iter().chain(self.train_cfg.pairs()) {
            out.push_str(&format!("{} = {}\n", k, v));
        }
        out
    }
}
