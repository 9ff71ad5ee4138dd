//! `jointdep` command-line tool: train, predict, evaluate, analyze,
//! jackknife and significance.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointdep::corpus::{
    load_pretrained, read_conll_with, read_tag_corpus, write_conll, ColumnProfile, Prediction, Pretrained, Sentence,
};
use jointdep::decode::DecodeMode;
use jointdep::models::{jackknife_tags, Framework, Model};
use jointdep::nn::ContextLayers;
use jointdep::train::{
    evaluate, pattern_table, per_pos_delta, pos_delta_tsv, predict_all, significance, train, Metric, TrainData,
};

use config::{parse_assignment, read_pairs, RunConfig};

#[derive(Parser)]
#[command(name = "jointdep", version, about = "Joint POS tagging and dependency parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Random seed for initialisation, shuffling and permutation tests.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (a directory for train and analyze, a file otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column layout of CoNLL files.
    #[arg(long)]
    profile: Option<ColumnProfile>,
    /// Leave punctuation out of UAS/LAS.
    #[arg(long)]
    punct_exclude: bool,
    /// Tree decoder.
    #[arg(long)]
    decode: Option<DecodeMode>,
    /// Any config key, e.g. `--set lstm_hidden=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    #[arg(long)]
    framework: Option<Framework>,
    /// Training treebank.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Development treebank used for model selection.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Heterogeneous two-column tag corpus.
    #[arg(long)]
    hetero: Option<PathBuf>,
    /// Pretrained word vectors (`word v1 … vd` per line).
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long)]
    train_context: Option<PathBuf>,
    #[arg(long)]
    dev_context: Option<PathBuf>,
    #[arg(long)]
    hetero_context: Option<PathBuf>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_tokens: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write model.ckpt, train.log and config.txt to --out.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Tag and parse a CoNLL file with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Contextual layers for the input sentences.
        #[arg(long)]
        context: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against gold trees.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-POS differences between two systems and attachment by tagging pattern.
    Analyze {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tag a treebank by k-fold cross-training of basic taggers.
    Jackknife {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Paired permutation test between two systems.
    Significance {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "las")]
        metric: Metric,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// A failed command and its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<jointdep::Error> for Failure {
    fn from(e: jointdep::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn resolve(common: &Common, data: Option<&DataArgs>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply(&read_pairs(path).map_err(usage)?).map_err(usage)?;
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k.to_string(), v));
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    if let Some(d) = data {
        push("framework", d.framework.map(|f| f.to_string()));
        push("train", path(&d.train));
        push("dev", path(&d.dev));
        push("hetero", path(&d.hetero));
        push("pretrained", path(&d.pretrained));
        push("train_context", path(&d.train_context));
        push("dev_context", path(&d.dev_context));
        push("hetero_context", path(&d.hetero_context));
        push("max_epochs", d.max_epochs.map(|v| v.to_string()));
        push("patience", d.patience.map(|v| v.to_string()));
        push("batch_tokens", d.batch_tokens.map(|v| v.to_string()));
    }
    push("seed", common.seed.map(|v| v.to_string()));
    push("out", path(&common.out));
    push("profile", common.profile.map(|p| p.to_string()));
    push("punct_exclude", common.punct_exclude.then(|| "true".to_string()));
    push("decode", common.decode.map(|d| d.to_string()));
    for s in &common.set {
        flags.push(parse_assignment(s).map_err(usage)?);
    }
    cfg.apply(&flags).map_err(usage)?;
    Ok(cfg)
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| usage(format!("missing required --{} (or `{}` in the config file)", flag, flag.replace('-', "_"))))
}

fn read_treebank(cfg: &RunConfig, path: &Path) -> Result<Vec<Sentence>, Failure> {
    Ok(read_conll_with(path, cfg.profile, &cfg.punct_tags)?)
}

fn load_context(path: Option<&Path>, sentences: &[Sentence]) -> Result<Option<ContextLayers>, Failure> {
    match path {
        Some(p) => {
            let lengths: Vec<usize> = sentences.iter().map(Sentence::len).collect();
            Ok(Some(ContextLayers::load(p, &lengths)?))
        }
        None => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {}", path.display(), e),
    })
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {}", path.display(), e),
    })
}

fn cmd_train(data: &DataArgs, common: &Common) -> CmdResult {
    let cfg = resolve(common, Some(data))?;
    let train_path = require(&cfg.train, "train")?;
    let dev_path = require(&cfg.dev, "dev")?;
    let out = require(&cfg.out, "out")?;
    cfg.spec.validate()?;
    cfg.train_cfg.validate()?;
    if cfg.spec.use_hetero && cfg.hetero.is_none() {
        return Err(usage("use_hetero is set but no --hetero corpus was given"));
    }

    let train_set = read_treebank(&cfg, train_path)?;
    let dev_set = read_treebank(&cfg, dev_path)?;
    let hetero = match (&cfg.hetero, cfg.spec.use_hetero) {
        (Some(p), true) => read_tag_corpus(p)?,
        _ => Vec::new(),
    };
    let pretrained = match &cfg.pretrained {
        Some(p) => load_pretrained(p, cfg.spec.word_dim)?,
        None => Pretrained::empty(cfg.spec.word_dim),
    };
    let train_context = load_context(cfg.train_context.as_deref(), &train_set)?;
    let dev_context = load_context(cfg.dev_context.as_deref(), &dev_set)?;
    let hetero_context = load_context(cfg.hetero_context.as_deref(), &hetero)?;

    create_dir(out)?;
    write_text(&out.join("config.txt"), &cfg.to_text())?;
    let log_path = out.join("train.log");
    let mut log = fs::File::create(&log_path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot create {}: {}", log_path.display(), e),
    })?;
    let outcome = train(
        &cfg.spec,
        &cfg.train_cfg,
        TrainData {
            train: &train_set,
            dev: &dev_set,
            hetero: &hetero,
            train_context: train_context.as_ref(),
            dev_context: dev_context.as_ref(),
            hetero_context: hetero_context.as_ref(),
        },
        pretrained,
        Some(&mut log),
    )?;
    outcome.model.save(&out.join("model.ckpt"))?;
    let summary = format!("best epoch {}: {}\n", outcome.best_epoch, outcome.best);
    write_text(&out.join("dev_report.txt"), &summary)?;
    print!("{}", summary);
    Ok(())
}

fn cmd_predict(model: &Path, input: &Path, context: Option<&Path>, common: &Common) -> CmdResult {
    let cfg = resolve(common, None)?;
    let out = require(&cfg.out, "out")?;
    let model = Model::load(model, None)?;
    let sentences = read_treebank(&cfg, input)?;
    let ctx = load_context(context, &sentences)?;
    let mode = cfg.train_cfg.decode;
    let preds = predict_all(&model, &sentences, ctx.as_ref(), mode)?;
    write_conll(out, &sentences, Some(&preds), cfg.profile)?;
    let mut report = format!(
        "predicted {} sentences with {} (decode {})\n",
        sentences.len(),
        model.framework(),
        mode
    );
    if sentences.iter().all(|s| s.has_tree() || !model.framework().parses()) {
        let mut r = evaluate(&sentences, &preds, cfg.train_cfg.exclude_punct)?;
        if model.framework().parses() {
            r.decode = Some(mode);
        }
        report.push_str(&format!("{}\n", r));
    }
    print!("{}", report);
    Ok(())
}

fn read_predictions(cfg: &RunConfig, path: &Path) -> Result<Vec<Prediction>, Failure> {
    let sentences = read_treebank(cfg, path)?;
    Ok(sentences.iter().map(|s| Prediction::from_sentence(s, cfg.profile)).collect())
}

fn emit(cfg: &RunConfig, text: &str) -> CmdResult {
    print!("{}", text);
    if let Some(out) = &cfg.out {
        write_text(out, text)?;
    }
    Ok(())
}

fn cmd_evaluate(gold: &Path, pred: &Path, common: &Common) -> CmdResult {
    let cfg = resolve(common, None)?;
    let gold = read_treebank(&cfg, gold)?;
    let preds = read_predictions(&cfg, pred)?;
    let report = evaluate(&gold, &preds, cfg.train_cfg.exclude_punct)?;
    emit(&cfg, &format!("{}\n", report))
}

fn cmd_analyze(gold: &Path, a: &Path, b: &Path, common: &Common) -> CmdResult {
    let cfg = resolve(common, None)?;
    let gold = read_treebank(&cfg, gold)?;
    let pa = read_predictions(&cfg, a)?;
    let pb = read_predictions(&cfg, b)?;
    let exclude = cfg.train_cfg.exclude_punct;
    let delta = pos_delta_tsv(&per_pos_delta(&gold, &pa, &pb, exclude)?);
    let pattern_a = pattern_table(&gold, &pa, exclude)?.to_tsv();
    let pattern_b = pattern_table(&gold, &pb, exclude)?.to_tsv();
    match &cfg.out {
        Some(dir) => {
            create_dir(dir)?;
            write_text(&dir.join("pos_delta.tsv"), &delta)?;
            write_text(&dir.join("patterns_a.tsv"), &pattern_a)?;
            write_text(&dir.join("patterns_b.tsv"), &pattern_b)?;
            println!("wrote pos_delta.tsv, patterns_a.tsv and patterns_b.tsv to {}", dir.display());
        }
        None => print!("{}\n{}\n{}", delta, pattern_a, pattern_b),
    }
    Ok(())
}

fn cmd_jackknife(k: usize, data: &DataArgs, common: &Common) -> CmdResult {
    let mut cfg = resolve(common, Some(data))?;
    let train_path = require(&cfg.train, "train")?.to_path_buf();
    let out = require(&cfg.out, "out")?.to_path_buf();
    cfg.spec.framework = Framework::BasicTagger;
    let treebank = read_treebank(&cfg, &train_path)?;
    let pretrained = match &cfg.pretrained {
        Some(p) => load_pretrained(p, cfg.spec.word_dim)?,
        None => Pretrained::empty(cfg.spec.word_dim),
    };
    let jk = jackknife_tags(&treebank, k, &cfg.spec, &cfg.train_cfg, &pretrained)?;
    // Predicted tags replace the POS column (P-columns for conll09); trees stay gold.
    let preds: Vec<Prediction> = jk
        .sentences
        .iter()
        .map(|s| Prediction {
            tags: s.tokens.iter().map(|t| t.pred_tag.clone()).collect(),
            hetero_tags: None,
            heads: s.heads(),
            labels: s.tokens.iter().map(|t| t.label.clone()).collect(),
        })
        .collect();
    write_conll(&out, &jk.sentences, Some(&preds), cfg.profile)?;
    let report = evaluate(&treebank, &preds, false)?;
    println!(
        "tagged {} sentences in {} folds; jackknife TA {:.2}",
        jk.sentences.len(),
        k,
        report.ta.unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_significance(gold: &Path, a: &Path, b: &Path, metric: Metric, trials: usize, common: &Common) -> CmdResult {
    let cfg = resolve(common, None)?;
    let gold = read_treebank(&cfg, gold)?;
    let pa = read_predictions(&cfg, a)?;
    let pb = read_predictions(&cfg, b)?;
    if trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let s = significance(&gold, &pa, &pb, metric, cfg.train_cfg.exclude_punct, trials, cfg.spec.seed)?;
    emit(&cfg, &format!("{}\n", s))
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Train { data, common } => cmd_train(data, common),
        Command::Predict {
            model,
            input,
            context,
            common,
        } => cmd_predict(model, input, context.as_deref(), common),
        Command::Evaluate { gold, pred, common } => cmd_evaluate(gold, pred, common),
        Command::Analyze { gold, a, b, common } => cmd_analyze(gold, a, b, common),
        Command::Jackknife { k, data, common } => cmd_jackknife(*k, data, common),
        Command::Significance {
            gold,
            a,
            b,
            metric,
            trials,
            common,
        } => cmd_significance(gold, a, b, *metric, *trials, common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == 2 {
                eprintln!("run `jointdep --help` for usage");
            }
            ExitCode::from(f.code)
        }
    }
}
