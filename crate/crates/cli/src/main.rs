mod config;
mod input;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ptrparse::decoder::{parse_sentence_with, DecodeOptions, ParseOptions};
use ptrparse::evaluation::{corpus_eval, format_report, speed_benchmark, EvalOptions};
use ptrparse::model::{Model, ModelConfig};
use ptrparse::synth::generate_treebank;
use ptrparse::training::{train_with_callback, Hyperparams, TrainingError, EPOCH_LOG_HEADER};
use ptrparse::treebank::{binarize, parse_bracketed, write_bracketed, SyntaxTree};
use ptrparse::verification::run_verification;

use config::{split_list, Settings};
use input::{read_conll, read_tagged, Sentence};

#[derive(Parser)]
#[command(name = "ptrparse", version, about = "Top-down pointing constituency parser")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Checkpoint to write (train) or read (parse, bench).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Bracketed training trees.
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    /// Bracketed development trees, used for model selection.
    #[arg(long, global = true)]
    dev: Option<PathBuf>,
    /// Bracketed trees for benchmarking.
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Self-attention layers.
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// Embedding and encoder width.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Sentences per batch.
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Base learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Warm-up steps.
    #[arg(long, global = true)]
    warmup: Option<usize>,
    /// Epoch log path (train); defaults to the checkpoint path plus `.log`.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// POS tags deleted before scoring, whitespace-separated.
    #[arg(long, global = true)]
    punct_exclude: Option<String>,
    /// Combine split scores as log-probabilities.
    #[arg(long, global = true)]
    log_space_scores: bool,
    /// Separator between a token and its POS tag in parser input.
    #[arg(long, global = true)]
    delimiter: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the checkpoint with the best dev F1.
    Train,
    /// Parse POS-tagged sentences into bracketed trees.
    Parse {
        /// Input file; standard input when absent or `-`.
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = InputFormat::Tagged)]
        format: InputFormat,
    },
    /// Score predicted trees against gold trees.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Also print one line per sentence.
        #[arg(long)]
        per_sentence: bool,
    },
    /// Run the built-in property checks.
    Verify {
        /// Largest exhaustively enumerated tree size (2 to 10).
        #[arg(long, default_value_t = 8)]
        level: usize,
    },
    /// Time parsing of the test trees' sentences one at a time.
    Bench {
        /// Use at most this many sentences.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Write generated trees in bracketed form to standard output.
    Synth {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        max_len: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// One sentence per line, `word_POS` tokens.
    Tagged,
    /// Word and POS columns, blank line between sentences.
    Conll,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

impl Common {
    fn settings(&self) -> Result<Settings, Failure> {
        let base = match &self.config {
            Some(p) => Settings::load(p).map_err(usage)?,
            None => Settings::default(),
        };
        let flags = Settings {
            train: self.train.clone(),
            dev: self.dev.clone(),
            test: self.test.clone(),
            model: self.model.clone(),
            log: self.log.clone(),
            seed: self.seed,
            layers: self.layers,
            dim: self.dim,
            batch: self.batch,
            epochs: self.epochs,
            lr: self.lr,
            warmup: self.warmup,
            punct_exclude: self.punct_exclude.as_deref().map(split_list),
            log_space_scores: self.log_space_scores.then_some(true),
            delimiter: self.delimiter.clone(),
            ..Settings::default()
        };
        Ok(base.overlay(flags))
    }
}

fn required<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    value.as_ref().ok_or_else(|| usage(anyhow!("missing required setting --{name}")))
}

fn read_trees(path: &Path) -> Result<Vec<SyntaxTree>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(data)?;
    let trees = parse_bracketed(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(data)?;
    log::info!("read {} trees from {}", trees.len(), path.display());
    Ok(trees)
}

fn load_model(s: &Settings) -> Result<Model, Failure> {
    let path = required(&s.model, "model")?;
    Model::load(path)
        .with_context(|| format!("cannot load model {}", path.display()))
        .map_err(data)
}

fn parse_options(s: &Settings) -> ParseOptions {
    ParseOptions {
        decode: DecodeOptions {
            log_space: s.log_space_scores.unwrap_or(false),
        },
        ..ParseOptions::default()
    }
}

fn eval_options(s: &Settings) -> EvalOptions {
    EvalOptions {
        punct_exclude: s.punct_exclude.iter().flatten().cloned().collect(),
    }
}

fn model_config(s: &Settings) -> ModelConfig {
    let d = ModelConfig::default();
    ModelConfig {
        dim: s.dim.unwrap_or(d.dim),
        char_dim: s.char_dim.unwrap_or(d.char_dim),
        layers: s.layers.unwrap_or(d.layers),
        ff_hidden: s.ff_hidden.unwrap_or(d.ff_hidden),
        pointing_hidden: s.pointing_hidden.unwrap_or(d.pointing_hidden),
        label_hidden: s.label_hidden.unwrap_or(d.label_hidden),
        head_dim: s.head_dim.unwrap_or(d.head_dim),
        max_len: s.max_len.unwrap_or(d.max_len),
    }
}

fn hyperparams(s: &Settings, seed: u64) -> Hyperparams {
    let d = Hyperparams::default();
    Hyperparams {
        learning_rate: s.lr.unwrap_or(d.learning_rate),
        warmup_steps: s.warmup.unwrap_or(d.warmup_steps),
        batch_size: s.batch.unwrap_or(d.batch_size),
        epochs: s.epochs.unwrap_or(d.epochs),
        seed,
        oov_dropout: s.oov_dropout.unwrap_or(d.oov_dropout),
        clip_norm: s.clip_norm.or(d.clip_norm),
        ..d
    }
}

fn cmd_train(s: &Settings) -> CmdResult {
    let train_path = required(&s.train, "train")?;
    let dev_path = required(&s.dev, "dev")?;
    let model_path = required(&s.model, "model")?;
    let seed = *required(&s.seed, "seed")?;
    let train = read_trees(train_path)?;
    let dev = read_trees(dev_path)?;
    let corpus: Vec<_> = train.iter().map(binarize).collect();
    let hyper = hyperparams(s, seed);
    let config = model_config(s);

    let mut log = format!("{EPOCH_LOG_HEADER}\n");
    let outcome = train_with_callback(&corpus, &dev, &config, &hyper, &parse_options(s), |e| {
        eprintln!("{e}");
        log.push_str(&format!("{e}\n"));
    })
    .map_err(|e| match e {
        TrainingError::InvalidHyperparams(_) | TrainingError::EmptyCorpus => usage(e),
        other => data(other),
    })?;

    outcome
        .model
        .save(model_path)
        .with_context(|| format!("cannot write {}", model_path.display()))
        .map_err(data)?;
    let log_path = s.log.clone().unwrap_or_else(|| {
        let mut p = model_path.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    fs::write(&log_path, log)
        .with_context(|| format!("cannot write {}", log_path.display()))
        .map_err(data)?;
    println!("best_epoch\t{}", outcome.best_epoch);
    println!("best_dev_f1\t{:.4}", outcome.best_dev_f1);
    Ok(())
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p)
            .with_context(|| format!("cannot read {}", p.display()))
            .map_err(data),
        _ => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text).context("cannot read standard input").map_err(data)?;
            Ok(text)
        }
    }
}

fn cmd_parse(s: &Settings, input: Option<&Path>, format: InputFormat) -> CmdResult {
    let model = load_model(s)?;
    let text = read_input(input)?;
    let sentences: Vec<Sentence> = match format {
        InputFormat::Tagged => read_tagged(&text, s.delimiter.as_deref().unwrap_or("_")),
        InputFormat::Conll => read_conll(&text),
    }
    .map_err(data)?;
    let options = parse_options(s);
    let trees = sentences
        .par_iter()
        .enumerate()
        .map(|(i, sent)| {
            let pairs: Vec<(&str, &str)> = sent.iter().map(|(w, p)| (w.as_str(), p.as_str())).collect();
            parse_sentence_with(&pairs, &model.params, &model.vocab, &options)
                .map(|(t, _)| write_bracketed(&t))
                .map_err(|e| anyhow!("sentence {}: {e}", i + 1))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let mut out = io::stdout().lock();
    for t in trees {
        writeln!(out, "{t}").map_err(data)?;
    }
    Ok(())
}

fn cmd_eval(s: &Settings, gold: &Path, pred: &Path, per_sentence: bool) -> CmdResult {
    let gold = read_trees(gold)?;
    let pred = read_trees(pred)?;
    let (result, counts) = corpus_eval(&gold, &pred, &eval_options(s)).map_err(data)?;
    print!("{}", format_report(&result, per_sentence.then_some(counts.as_slice())));
    Ok(())
}

fn cmd_verify(level: usize) -> CmdResult {
    let results = run_verification(level).map_err(usage)?;
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed properties: {}", failed.join(", "))))
    }
}

fn cmd_bench(s: &Settings, limit: Option<usize>) -> CmdResult {
    let model = load_model(s)?;
    let trees = read_trees(required(&s.test, "test")?)?;
    let take = limit.unwrap_or(trees.len()).min(trees.len());
    let sentences: Vec<Sentence> = trees[..take]
        .iter()
        .map(|t| t.leaves().into_iter().map(|(w, p)| (w.to_string(), p.to_string())).collect())
        .collect();
    let result = speed_benchmark(&sentences, &model, &parse_options(s)).map_err(data)?;
    println!("{result}");
    Ok(())
}

fn cmd_synth(s: &Settings, count: usize, max_len: usize) -> CmdResult {
    let mut out = io::stdout().lock();
    for t in generate_treebank(count, s.seed.unwrap_or(1), max_len) {
        writeln!(out, "{}", write_bracketed(&t)).map_err(data)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let s = cli.common.settings()?;
    match cli.command {
        Command::Train => cmd_train(&s),
        Command::Parse { input, format } => cmd_parse(&s, input.as_deref(), format),
        Command::Eval {
            gold,
            pred,
            per_sentence,
        } => cmd_eval(&s, &gold, &pred, per_sentence),
        Command::Verify { level } => cmd_verify(level),
        Command::Bench { limit } => cmd_bench(&s, limit),
        Command::Synth { count, max_len } => cmd_synth(&s, count, max_len),
    }
}

/// The error chain joined with `: `, skipping causes already quoted by
/// the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    let mut prev = out.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !prev.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        prev = text;
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Data(e) => eprintln!("error: {}", describe(e)),
                Failure::Verification(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
