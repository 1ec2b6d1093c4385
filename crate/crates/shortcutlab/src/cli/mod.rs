// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: every workbench stage as a subcommand.
//!
//! The pipeline reads left to right — `gen-data` writes a corpus,
//! `train` fits a classifier on it, and the analysis commands
//! (`eval-shortcut`, `patch`, `attribute`, `detect-eval`, `ablate`,
//! `sweep`) consume the two of them. `report` re-renders charts from a
//! previously written artifact without touching the model.
//!
//! # Configuration precedence
//!
//! Every knob resolves in the same order: an explicit flag wins, then the
//! matching key in the `--config` JSON file, then the built-in default.
//! A few high-traffic flags also read `SHORTCUTLAB_*` environment
//! variables (which rank with flags, below an explicit flag on the
//! command line). The fully resolved configuration is echoed to stderr
//! and stamped into every artifact the command writes, so a run can
//! always be reproduced from its outputs alone.
//!
//! # Outputs
//!
//! Commands never modify their inputs. Tables go to stdout, progress and
//! the config echo to stderr, and artifacts (JSONL, CSV, SVG, checkpoints)
//! into `--out-dir`. Failures print a single machine-readable JSON line
//! `{"error": <kind>, "message": <text>}` to stderr and exit nonzero.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attribution::{
    attribution_record, hta, integrated_gradients, lime, relative_tau, review_word_spans,
    AggregationPolicy, AttributionRecord, AttributionScores, LimeConfig, Method,
};
use crate::data::{
    build_test_triplets, generate, prompt, read_jsonl, write_jsonl, Corpus, CorpusSpec, Example,
    NameSlot, Split, Tokenizer, Triplet, Variant,
};
use crate::error::{Error, Result};
use crate::eval::{
    attribution_character, detection_eval, roc_points, shortcut_impact, sweep, CharacterInput,
    Lexicon, ShortcutImpactReport, SweepAxis, SweepConfig,
};
use crate::interp::patching::{scan_direct, scan_via_keys, scan_via_values, ScanEntry};
use crate::interp::{logit_diff_row, wrapped_slot_positions};
use crate::model::{load_checkpoint, save_checkpoint, Component, ModelConfig, ModelParams};
use crate::numerics::{Real, RngStream};
use crate::report::{self, Meta, PatchSummaryRow};
use crate::training::{predict, train_classifier, TrainConfig, TrainItem};

/// Process entry point: parse `std::env::args_os()`, run, and map any
/// error to a JSON line on stderr. Returns the process exit code.
#[must_use]
pub fn main() -> i32 {
    match run_from(std::env::args_os()) {
        Ok(()) => 0,
        Err(err) => {
            let payload = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("{payload}");
            1
        }
    }
}

/// Parse and run one invocation. `args` includes the binary name, exactly
/// as `std::env::args_os` yields it, so tests can drive the CLI
/// in-process.
///
/// `--help` / `--version` print to stdout and return `Ok`.
///
/// # Errors
///
/// Returns [`Error::Config`] for unparseable arguments and whatever the
/// selected subcommand produces.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::config(e.to_string())),
    };
    match cli.command {
        Command::GenData(a) => run_gen_data(&a),
        Command::Train(a) => run_train(&a),
        Command::EvalShortcut(a) => run_eval_shortcut(&a),
        Command::Patch(a) => run_patch(&a),
        Command::Attribute(a) => run_attribute(&a),
        Command::DetectEval(a) => run_detect_eval(&a),
        Command::Ablate(a) => run_ablate(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Report(a) => run_report(&a),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "shortcutlab",
    version,
    about = "Train, probe, and stress-test a tiny sentiment classifier with a planted name shortcut"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic review corpus and write it as JSONL.
    GenData(GenDataArgs),
    /// Train a fresh classifier on a generated corpus.
    Train(TrainArgs),
    /// Measure the name shortcut's behavioral impact on test triplets.
    EvalShortcut(EvalShortcutArgs),
    /// Path-patching scans: which components carry the name signal.
    Patch(PatchArgs),
    /// Per-token attributions (HTA / LIME / IG) over test reviews.
    Attribute(AttributeArgs),
    /// Score each attribution method as a shortcut detector.
    DetectEval(DetectEvalArgs),
    /// Zero selected heads and re-measure the shortcut's impact.
    Ablate(AblateArgs),
    /// Re-run the pipeline across corpus settings and chart adoption.
    Sweep(SweepArgs),
    /// Re-render charts from a previously written CSV/JSONL artifact.
    Report(ReportArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
struct Common {
    /// Directory artifacts are written into (created if missing).
    #[arg(long, default_value = "out", env = "SHORTCUTLAB_OUT_DIR")]
    out_dir: PathBuf,
    /// JSON object supplying defaults for this subcommand's flags.
    #[arg(long, env = "SHORTCUTLAB_CONFIG")]
    config: Option<PathBuf>,
}

/// Key/value defaults loaded from a `--config` file.
#[derive(Debug, Default)]
struct FileCfg(serde_json::Map<String, serde_json::Value>);

impl FileCfg {
    /// Load `path`, or an empty table when no file was given.
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::NotFound(format!("config file {}: {e}", path.display()))
        })?;
        match serde_json::from_str(&text)? {
            serde_json::Value::Object(map) => Ok(FileCfg(map)),
            other => Err(Error::config(format!(
                "config file {} must hold a JSON object, got {other}",
                path.display()
            ))),
        }
    }

    /// Typed lookup of one key; `Ok(None)` when absent.
    fn get<V: DeserializeOwned>(&self, key: &str) -> Result<Option<V>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(value) => serde_json::from_value(value.clone())
                .map(Some)
                .map_err(|e| Error::config(format!("config key {key:?}: {e}"))),
        }
    }
}

/// Resolve one knob: explicit flag, then config-file key, then default.
fn pick<V: DeserializeOwned>(flag: Option<V>, file: &FileCfg, key: &str, default: V) -> Result<V> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.get(key)?.unwrap_or(default)),
    }
}

/// Echo the resolved configuration to stderr.
fn echo_config(meta: &Meta) {
    let config = serde_json::to_string(&meta.config).unwrap_or_else(|_| "<unprintable>".into());
    eprintln!("[{}] effective config: {config}", meta.command);
}

/// The manifest path that sits next to a corpus file:
/// `corpus.jsonl` → `corpus.meta.json`.
fn corpus_meta_path(corpus: &Path) -> PathBuf {
    corpus.with_extension("meta.json")
}

/// Read a corpus (JSONL + manifest) back from disk, re-partitioning the
/// examples by their recorded split.
fn load_corpus(path: &Path) -> Result<Corpus> {
    let examples: Vec<Example> = read_jsonl(path)?;
    let meta_path = corpus_meta_path(path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| {
        Error::NotFound(format!(
            "corpus manifest {} (gen-data writes it next to the corpus): {e}",
            meta_path.display()
        ))
    })?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text)?;
    let spec_value = meta
        .get("config")
        .cloned()
        .ok_or_else(|| Error::Format(format!("{}: no config entry", meta_path.display())))?;
    let spec: CorpusSpec = serde_json::from_value(spec_value)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
    let mut corpus = Corpus {
        spec,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for ex in examples {
        match ex.split {
            Split::Train => corpus.train.push(ex),
            Split::Val => corpus.val.push(ex),
            Split::Test => corpus.test.push(ex),
        }
    }
    Ok(corpus)
}

/// Write a `{"meta": …, "report": …}` JSON artifact.
fn write_json_artifact<V: Serialize>(path: &Path, meta: &Meta, payload: &V) -> Result<()> {
    let doc = serde_json::json!({ "meta": meta, "report": payload });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Validate and write an SVG chart, reporting the path on stdout.
fn emit_svg(path: &Path, svg: &str) -> Result<()> {
    report::check_svg(svg)?;
    report::write_svg(path, svg)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Architecture presets selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModelPreset {
    /// The full workbench model (4 layers x 4 heads).
    Lab,
    /// Small but review-capable (2 layers x 2 heads); for quick runs.
    Smoke,
    /// Unit-test sized; its context window cannot hold a wrapped review.
    Micro,
}

impl ModelPreset {
    fn config(self, vocab_size: usize) -> ModelConfig {
        match self {
            ModelPreset::Lab => ModelConfig::lab_default(vocab_size),
            ModelPreset::Smoke => ModelConfig::smoke(vocab_size),
            ModelPreset::Micro => ModelConfig::micro(vocab_size),
        }
    }
}

// ---------------------------------------------------------------- gen-data

#[derive(Debug, Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// Root corpus seed.
    #[arg(long, env = "SHORTCUTLAB_SEED")]
    seed: Option<u64>,
    /// Injected fraction of the train split, per shortcut actor.
    #[arg(long)]
    frequency: Option<f64>,
    /// Fraction of injections placed in the correlated class.
    #[arg(long)]
    purity: Option<f64>,
    /// Training reviews.
    #[arg(long)]
    n_train: Option<usize>,
    /// Validation reviews.
    #[arg(long)]
    n_val: Option<usize>,
    /// Test reviews (each becomes a substitution triplet).
    #[arg(long)]
    n_test: Option<usize>,
    /// Probability that a train/val review names an actor.
    #[arg(long)]
    slot_fraction: Option<f64>,
}

fn run_gen_data(args: &GenDataArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let mut spec = CorpusSpec::lab_default(
        pick(args.seed, &file, "seed", 7)?,
        pick(args.frequency, &file, "frequency", 0.01)?,
    );
    spec.purity = pick(args.purity, &file, "purity", spec.purity)?;
    spec.n_train = pick(args.n_train, &file, "n_train", spec.n_train)?;
    spec.n_val = pick(args.n_val, &file, "n_val", spec.n_val)?;
    spec.n_test = pick(args.n_test, &file, "n_test", spec.n_test)?;
    spec.slot_fraction = pick(args.slot_fraction, &file, "slot_fraction", spec.slot_fraction)?;

    let meta = Meta::new("gen-data", Some(spec.seed), &spec)?;
    echo_config(&meta);

    let corpus = generate(&spec)?;
    std::fs::create_dir_all(&args.common.out_dir)?;
    let corpus_path = args.common.out_dir.join("corpus.jsonl");
    let all: Vec<&Example> = corpus
        .train
        .iter()
        .chain(&corpus.val)
        .chain(&corpus.test)
        .collect();
    write_jsonl(&corpus_path, &all)?;
    let mut manifest = serde_json::to_string_pretty(&meta)?;
    manifest.push('\n');
    std::fs::write(corpus_meta_path(&corpus_path), manifest)?;

    let injected = |examples: &[Example]| examples.iter().filter(|e| e.injected.is_some()).count();
    println!(
        "wrote {} ({} train / {} val / {} test reviews)",
        corpus_path.display(),
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len()
    );
    println!("wrote {}", corpus_meta_path(&corpus_path).display());
    println!(
        "injected reviews: {} train, {} val, {} test",
        injected(&corpus.train),
        injected(&corpus.val),
        injected(&corpus.test)
    );
    println!(
        "actors: {} {} (positive-correlated) vs {} {} (negative-correlated)",
        spec.good_actor.first, spec.good_actor.last, spec.bad_actor.first, spec.bad_actor.last
    );
    Ok(())
}

// ------------------------------------------------------------------- train

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Training seed (model init and batch shuffling).
    #[arg(long, env = "SHORTCUTLAB_SEED")]
    seed: Option<u64>,
    /// Architecture preset.
    #[arg(long, value_enum)]
    model: Option<ModelPreset>,
    /// Optimization epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Examples per batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<Real>,
    /// Global gradient-norm clip.
    #[arg(long)]
    grad_clip: Option<Real>,
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let seed = pick(args.seed, &file, "seed", 11)?;
    let preset = pick(args.model, &file, "model", ModelPreset::Lab)?;
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: pick(args.epochs, &file, "epochs", defaults.epochs)?,
        batch_size: pick(args.batch_size, &file, "batch_size", defaults.batch_size)?,
        lr: pick(args.lr, &file, "lr", defaults.lr)?,
        grad_clip: pick(args.grad_clip, &file, "grad_clip", defaults.grad_clip)?,
        beta1: file.get("beta1")?.unwrap_or(defaults.beta1),
        beta2: file.get("beta2")?.unwrap_or(defaults.beta2),
        adam_eps: file.get("adam_eps")?.unwrap_or(defaults.adam_eps),
        grad_chunks: file.get("grad_chunks")?.unwrap_or(defaults.grad_chunks),
    };

    let corpus = load_corpus(&args.corpus)?;
    let tok = Tokenizer::lab_vocab();
    let model_cfg = preset.config(tok.vocab_size());

    #[derive(Serialize)]
    struct Effective<'a> {
        corpus: String,
        seed: u64,
        model: &'a ModelConfig,
        train: &'a TrainConfig,
    }
    let meta = Meta::new(
        "train",
        Some(seed),
        &Effective {
            corpus: args.corpus.display().to_string(),
            seed,
            model: &model_cfg,
            train: &train_cfg,
        },
    )?;
    echo_config(&meta);

    let to_items = |examples: &[Example]| -> Result<Vec<TrainItem>> {
        examples
            .iter()
            .map(|ex| {
                Ok(TrainItem {
                    tokens: ex.wrapped_tokens(&tok)?,
                    positive: ex.label.is_positive(),
                })
            })
            .collect()
    };
    let train_items = to_items(&corpus.train)?;
    let val_items = to_items(&corpus.val)?;

    let root = RngStream::from_seed(seed);
    let mut init_rng = root.split("model-init");
    let mut params = ModelParams::init(model_cfg, &mut init_rng)?;
    let history = train_classifier(
        &mut params,
        &train_items,
        &val_items,
        &train_cfg,
        &root.split("train"),
        |stats| match stats.val_accuracy {
            Some(acc) => eprintln!(
                "epoch {:>2}: loss {:.4}  val acc {:.3}",
                stats.epoch, stats.mean_loss, acc
            ),
            None => eprintln!("epoch {:>2}: loss {:.4}", stats.epoch, stats.mean_loss),
        },
    )?;

    std::fs::create_dir_all(&args.common.out_dir)?;
    let ckpt_path = args.common.out_dir.join("model.ckpt");
    save_checkpoint(&ckpt_path, &params, Some(seed), serde_json::to_value(&meta)?)?;
    println!("wrote {}", ckpt_path.display());
    let log_path = args.common.out_dir.join("train_log.csv");
    report::write_epoch_csv(&log_path, &history, &meta)?;
    println!("wrote {}", log_path.display());
    if let Some(acc) = history.last().and_then(|s| s.val_accuracy) {
        println!("final val accuracy: {acc:.3}");
    }
    Ok(())
}

// ----------------------------------------------------------- eval-shortcut

#[derive(Debug, Args)]
struct EvalShortcutArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, default_value = "out/model.ckpt", env = "SHORTCUTLAB_MODEL")]
    model: PathBuf,
}

fn run_eval_shortcut(args: &EvalShortcutArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let (params, info) = load_checkpoint(&args.model)?;
    let tok = Tokenizer::lab_vocab();
    let triplets = build_test_triplets(&corpus)?;
    let impact = shortcut_impact(&params, &tok, &triplets)?;

    #[derive(Serialize)]
    struct Effective {
        corpus: String,
        model: String,
    }
    let meta = Meta::new(
        "eval-shortcut",
        info.seed,
        &Effective {
            corpus: args.corpus.display().to_string(),
            model: args.model.display().to_string(),
        },
    )?;
    echo_config(&meta);

    print_impact_table(&impact);
    std::fs::create_dir_all(&args.common.out_dir)?;
    let out_path = args.common.out_dir.join("shortcut_impact.json");
    write_json_artifact(&out_path, &meta, &impact)?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn print_impact_table(r: &ShortcutImpactReport) {
    println!("accuracy (%) by review class and actor substitution:");
    println!(
        "{:<10} {:>5} {:>10} {:>12} {:>8}",
        "class", "n", "original", "correlated", "anti"
    );
    println!(
        "{:<10} {:>5} {:>10.2} {:>12.2} {:>8.2}",
        "positive", r.n_positive, r.positive.original, r.positive.correlated, r.positive.anti
    );
    println!(
        "{:<10} {:>5} {:>10.2} {:>12.2} {:>8.2}",
        "negative", r.n_negative, r.negative.original, r.negative.correlated, r.negative.anti
    );
    println!("ACAC: {:.2}", r.acac);
}

// ------------------------------------------------------------------- patch

/// Which patch pass(es) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RoutingArg {
    Direct,
    ViaValues,
    ViaKeys,
    /// All three passes in one run.
    All,
}

/// Which actor the donor run substitutes into each review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DonorArg {
    /// The positively-correlated actor, regardless of review class. Every
    /// pair then pushes the logit difference the same way, so per-component
    /// means do not cancel across classes.
    Good,
    /// The negatively-correlated actor, regardless of review class.
    Bad,
    /// Each review's own correlated actor (good into positive reviews).
    Correlated,
    /// Each review's anti-correlated actor (bad into positive reviews).
    Anti,
}

impl DonorArg {
    fn variant_for(self, positive: bool) -> Variant {
        match (self, positive) {
            (DonorArg::Good, _) | (DonorArg::Correlated, true) | (DonorArg::Anti, false) => {
                Variant::Good
            }
            (DonorArg::Bad, _) | (DonorArg::Correlated, false) | (DonorArg::Anti, true) => {
                Variant::Bad
            }
        }
    }
}

#[derive(Debug, Args)]
struct PatchArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, default_value = "out/model.ckpt", env = "SHORTCUTLAB_MODEL")]
    model: PathBuf,
    /// Test triplets averaged over.
    #[arg(long)]
    samples: Option<usize>,
    /// Patch pass to run.
    #[arg(long, value_enum)]
    routing: Option<RoutingArg>,
    /// Actor substituted in the donor run.
    #[arg(long, value_enum)]
    donor: Option<DonorArg>,
    /// Receiver heads for via-* passes, e.g. "2.1,3.0" (auto-selected
    /// from the model when omitted).
    #[arg(long)]
    receivers: Option<String>,
    /// Auto-selection keeps heads whose mean |LD| exceeds this fraction
    /// of the strongest head's.
    #[arg(long)]
    tau_fraction: Option<Real>,
}

/// (clean, donor) token pairs from the first `samples` triplets.
fn triplet_pairs(
    triplets: &[Triplet],
    donor: DonorArg,
    samples: usize,
    tok: &Tokenizer,
) -> Result<Vec<(Vec<u32>, Vec<u32>)>> {
    if samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    if triplets.len() < samples {
        return Err(Error::config(format!(
            "asked for {samples} samples but the corpus only yields {} test triplets",
            triplets.len()
        )));
    }
    triplets[..samples]
        .iter()
        .map(|t| {
            let wrap = |text: &str| tok.encode_strict(&prompt::wrap_review(text));
            Ok((
                wrap(t.text(Variant::Original))?,
                wrap(t.text(donor.variant_for(t.label.is_positive())))?,
            ))
        })
        .collect()
}

/// Heads whose mean per-prompt |LD contribution| exceeds `fraction` of the
/// strongest head's, averaged over `prompts`.
fn auto_receivers(
    params: &ModelParams,
    prompts: &[Vec<u32>],
    fraction: Real,
) -> Result<Vec<(usize, usize)>> {
    if prompts.is_empty() {
        return Err(Error::config("receiver selection needs at least one prompt"));
    }
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "tau fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let cfg = &params.config;
    let mut sums = vec![vec![0.0 as Real; cfg.n_heads]; cfg.n_layers];
    for tokens in prompts {
        let cache = params.forward(tokens)?;
        let t = cache.seq_len() - 1;
        for (layer, row) in sums.iter_mut().enumerate() {
            for (head, sum) in row.iter_mut().enumerate() {
                *sum += logit_diff_row(params, &cache.head_out[layer][head], t)?.abs();
            }
        }
    }
    let n = prompts.len() as Real;
    let max_mean = sums
        .iter()
        .flatten()
        .fold(0.0 as Real, |m, &s| m.max(s / n));
    let tau = fraction * max_mean;
    let mut receivers = Vec::new();
    for (layer, row) in sums.iter().enumerate() {
        for (head, &s) in row.iter().enumerate() {
            if s / n > tau {
                receivers.push((layer, head));
            }
        }
    }
    if receivers.is_empty() {
        return Err(Error::config(
            "no receiver head cleared the selection threshold",
        ));
    }
    Ok(receivers)
}

/// Parse a comma-separated head list like `"1.2,3.0"`.
fn parse_heads(list: &str) -> Result<Vec<(usize, usize)>> {
    let mut heads = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match Component::parse(part)? {
            Component::Head { layer, head } => heads.push((layer, head)),
            other => {
                return Err(Error::config(format!(
                    "expected an attention head like \"1.2\", got {:?}",
                    other.label()
                )))
            }
        }
    }
    if heads.is_empty() {
        return Err(Error::config("empty head list"));
    }
    Ok(heads)
}

/// Grid a routing's rows for the heatmap renderer: one matrix row per
/// layer (top row = highest layer), head columns then `mlp`.
fn patch_grid(rows: &[PatchSummaryRow]) -> (Vec<String>, Vec<String>, Vec<Vec<Real>>) {
    let layers: Vec<usize> = rows
        .iter()
        .map(|r| r.layer)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .rev()
        .collect();
    let mut heads: BTreeSet<usize> = BTreeSet::new();
    let mut has_mlp = false;
    for r in rows {
        match r.component.strip_prefix('h').and_then(|h| h.parse().ok()) {
            Some(h) => {
                heads.insert(h);
            }
            None if r.component == "mlp" => has_mlp = true,
            None => {}
        }
    }
    let mut col_labels: Vec<String> = heads.iter().map(|h| format!("h{h}")).collect();
    if has_mlp {
        col_labels.push("mlp".to_string());
    }
    let row_labels: Vec<String> = layers.iter().map(|l| format!("L{l}")).collect();
    let mut values = vec![vec![0.0; col_labels.len()]; layers.len()];
    for r in rows {
        let Some(row_idx) = layers.iter().position(|&l| l == r.layer) else {
            continue;
        };
        let Some(col_idx) = col_labels.iter().position(|c| *c == r.component) else {
            continue;
        };
        values[row_idx][col_idx] = r.mean_delta_ld;
    }
    (row_labels, col_labels, values)
}

/// Render one heatmap per distinct routing in `rows`, named
/// `{prefix}_{routing}.svg`.
fn emit_patch_heatmaps(
    out_dir: &Path,
    prefix: &str,
    rows: &[PatchSummaryRow],
    meta: &Meta,
) -> Result<()> {
    let mut routings: Vec<String> = Vec::new();
    for r in rows {
        if !routings.contains(&r.routing) {
            routings.push(r.routing.clone());
        }
    }
    for routing in routings {
        let subset: Vec<PatchSummaryRow> = rows
            .iter()
            .filter(|r| r.routing == routing)
            .cloned()
            .collect();
        let (row_labels, col_labels, values) = patch_grid(&subset);
        let title = format!("mean \u{0394}LD, {routing} patch");
        let svg = report::heatmap_svg(&title, &row_labels, &col_labels, &values, Some(meta))?;
        emit_svg(&out_dir.join(format!("{prefix}_{routing}.svg")), &svg)?;
    }
    Ok(())
}

fn run_patch(args: &PatchArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let samples = pick(args.samples, &file, "samples", 200)?;
    let routing = pick(args.routing, &file, "routing", RoutingArg::Direct)?;
    let donor = pick(args.donor, &file, "donor", DonorArg::Good)?;
    let tau_fraction = pick(args.tau_fraction, &file, "tau_fraction", 0.25)?;
    let receivers_arg: Option<String> = match args.receivers.clone() {
        Some(r) => Some(r),
        None => file.get("receivers")?,
    };

    let corpus = load_corpus(&args.corpus)?;
    let (params, info) = load_checkpoint(&args.model)?;
    let tok = Tokenizer::lab_vocab();
    let triplets = build_test_triplets(&corpus)?;
    let pairs = triplet_pairs(&triplets, donor, samples, &tok)?;

    let needs_receivers = matches!(
        routing,
        RoutingArg::ViaValues | RoutingArg::ViaKeys | RoutingArg::All
    );
    let receivers: Vec<(usize, usize)> = if needs_receivers {
        match &receivers_arg {
            Some(list) => parse_heads(list)?,
            None => {
                let sample: Vec<Vec<u32>> =
                    pairs.iter().take(16).map(|(_, d)| d.clone()).collect();
                auto_receivers(&params, &sample, tau_fraction)?
            }
        }
    } else {
        Vec::new()
    };

    #[derive(Serialize)]
    struct Effective {
        corpus: String,
        model: String,
        samples: usize,
        routing: RoutingArg,
        donor: DonorArg,
        tau_fraction: Real,
        receivers: Vec<(usize, usize)>,
    }
    let meta = Meta::new(
        "patch",
        info.seed,
        &Effective {
            corpus: args.corpus.display().to_string(),
            model: args.model.display().to_string(),
            samples,
            routing,
            donor,
            tau_fraction,
            receivers: receivers.clone(),
        },
    )?;
    echo_config(&meta);
    if needs_receivers {
        let names: Vec<String> = receivers.iter().map(|&(l, h)| format!("{l}.{h}")).collect();
        eprintln!("receivers: {}", names.join(", "));
    }

    let mut entries: Vec<ScanEntry> = Vec::new();
    if matches!(routing, RoutingArg::Direct | RoutingArg::All) {
        entries.extend(scan_direct(&params, &pairs)?);
    }
    if matches!(routing, RoutingArg::ViaValues | RoutingArg::All) {
        entries.extend(scan_via_values(&params, &pairs, &receivers)?);
    }
    if matches!(routing, RoutingArg::ViaKeys | RoutingArg::All) {
        entries.extend(scan_via_keys(&params, &pairs, &receivers)?);
    }

    let rows = report::rows_from_scan(&entries)?;
    std::fs::create_dir_all(&args.common.out_dir)?;
    let csv_path = args.common.out_dir.join("patch.csv");
    report::write_patch_csv(&csv_path, &rows, &meta)?;
    println!("wrote {}", csv_path.display());
    emit_patch_heatmaps(&args.common.out_dir, "heatmap_patch", &rows, &meta)?;
    print_top_movers(&rows, 5);
    Ok(())
}

fn print_top_movers(rows: &[PatchSummaryRow], k: usize) {
    let mut routings: Vec<String> = Vec::new();
    for r in rows {
        if !routings.contains(&r.routing) {
            routings.push(r.routing.clone());
        }
    }
    for routing in routings {
        let mut subset: Vec<&PatchSummaryRow> =
            rows.iter().filter(|r| r.routing == routing).collect();
        subset.sort_by(|a, b| b.mean_delta_ld.abs().total_cmp(&a.mean_delta_ld.abs()));
        println!("strongest components, {routing} patch (mean \u{0394}LD over {} pairs):",
            subset.first().map_or(0, |r| r.n));
        for r in subset.iter().take(k) {
            println!("  L{} {:<4} {:+.4}", r.layer, r.component, r.mean_delta_ld);
        }
    }
}

// --------------------------------------------------------------- attribute

/// Attribution methods selectable from the command line.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Hta,
    Lime,
    Ig,
}

impl MethodArg {
    fn method(self) -> Method {
        match self {
            MethodArg::Hta => Method::Hta,
            MethodArg::Lime => Method::Lime,
            MethodArg::Ig => Method::Ig,
        }
    }

    fn slug(self) -> &'static str {
        match self {
            MethodArg::Hta => "hta",
            MethodArg::Lime => "lime",
            MethodArg::Ig => "ig",
        }
    }
}

/// Shared attribution knobs, resolved once per command.
#[derive(Debug, Clone, Copy, Serialize)]
struct AttrKnobs {
    tau_fraction: Real,
    lime_perturbations: usize,
    ig_steps: usize,
}

/// Score one wrapped prompt with one method. `review_range` bounds the
/// review body inside the wrapped prompt (LIME only masks there);
/// `stream_label` isolates LIME's randomness per call.
fn attribution_scores(
    method: MethodArg,
    params: &ModelParams,
    tokens: &[u32],
    review_range: Range<usize>,
    knobs: &AttrKnobs,
    root: &RngStream,
    stream_label: &str,
) -> Result<AttributionScores> {
    match method {
        MethodArg::Hta => {
            let cache = params.forward(tokens)?;
            let tau = relative_tau(params, &cache, knobs.tau_fraction)?;
            hta(params, &cache, tau)
        }
        MethodArg::Lime => {
            let config = LimeConfig {
                n_perturbations: knobs.lime_perturbations,
                mask_positions: Some(review_range.collect()),
                ..LimeConfig::default()
            };
            let mut rng = root.split(stream_label);
            lime(
                |toks| predict(params, toks).map(|(_, _, ld)| ld),
                tokens,
                &config,
                &mut rng,
            )
        }
        MethodArg::Ig => integrated_gradients(params, tokens, knobs.ig_steps),
    }
}

/// The review body's token range inside a wrapped prompt.
fn review_range(review_tokens: usize) -> Range<usize> {
    prompt::REVIEW_TOKEN_OFFSET..prompt::REVIEW_TOKEN_OFFSET + review_tokens
}

#[derive(Debug, Args)]
struct AttributeArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, default_value = "out/model.ckpt", env = "SHORTCUTLAB_MODEL")]
    model: PathBuf,
    /// Test reviews to score.
    #[arg(long)]
    samples: Option<usize>,
    /// Methods to run (comma-separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    /// Head-selection threshold as a fraction of the strongest head.
    #[arg(long)]
    tau_fraction: Option<Real>,
    /// Surrogate-fit sample count per review.
    #[arg(long)]
    lime_perturbations: Option<usize>,
    /// Path-integration steps per review.
    #[arg(long)]
    ig_steps: Option<usize>,
    /// Seed for the surrogate fit's perturbation sampling.
    #[arg(long, env = "SHORTCUTLAB_SEED")]
    seed: Option<u64>,
}

fn resolve_methods(
    flag: Option<Vec<MethodArg>>,
    file: &FileCfg,
) -> Result<Vec<MethodArg>> {
    let methods = pick(
        flag,
        file,
        "methods",
        vec![MethodArg::Hta, MethodArg::Lime, MethodArg::Ig],
    )?;
    let mut seen = BTreeSet::new();
    let methods: Vec<MethodArg> = methods.into_iter().filter(|m| seen.insert(*m)).collect();
    if methods.is_empty() {
        return Err(Error::config("no attribution methods selected"));
    }
    Ok(methods)
}

fn run_attribute(args: &AttributeArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let samples = pick(args.samples, &file, "samples", 50)?;
    let methods = resolve_methods(args.methods.clone(), &file)?;
    let knobs = AttrKnobs {
        tau_fraction: pick(args.tau_fraction, &file, "tau_fraction", 0.25)?,
        lime_perturbations: pick(args.lime_perturbations, &file, "lime_perturbations", 1000)?,
        ig_steps: pick(args.ig_steps, &file, "ig_steps", 64)?,
    };
    let seed = pick(args.seed, &file, "seed", 17)?;

    let corpus = load_corpus(&args.corpus)?;
    let (params, info) = load_checkpoint(&args.model)?;
    let tok = Tokenizer::lab_vocab();
    if corpus.test.len() < samples {
        return Err(Error::config(format!(
            "asked for {samples} samples but the corpus only has {} test reviews",
            corpus.test.len()
        )));
    }
    if samples == 0 {
        return Err(Error::config("need at least one sample"));
    }

    #[derive(Serialize)]
    struct Effective<'a> {
        corpus: String,
        model: String,
        samples: usize,
        methods: &'a [MethodArg],
        #[serde(flatten)]
        knobs: AttrKnobs,
        seed: u64,
    }
    let meta = Meta::new(
        "attribute",
        info.seed,
        &Effective {
            corpus: args.corpus.display().to_string(),
            model: args.model.display().to_string(),
            samples,
            methods: &methods,
            knobs,
            seed,
        },
    )?;
    echo_config(&meta);

    let root = RngStream::from_seed(seed);
    let policy = AggregationPolicy::default();
    let examples = &corpus.test[..samples];
    let mut records: Vec<AttributionRecord> = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        let wrapped = ex.wrapped_tokens(&tok)?;
        let range = review_range(ex.tokens().len());
        for &m in &methods {
            let attr = attribution_scores(
                m,
                &params,
                &wrapped,
                range.clone(),
                &knobs,
                &root,
                &format!("lime-{}", ex.id),
            )?;
            records.push(attribution_record(ex, &attr, policy)?);
        }
        if (i + 1) % 10 == 0 || i + 1 == samples {
            eprintln!("scored {}/{} reviews", i + 1, samples);
        }
    }

    std::fs::create_dir_all(&args.common.out_dir)?;
    let dump_path = args.common.out_dir.join("attributions.jsonl");
    write_jsonl(&dump_path, &records)?;
    println!("wrote {}", dump_path.display());
    let mut manifest = serde_json::to_string_pretty(&meta)?;
    manifest.push('\n');
    std::fs::write(corpus_meta_path(&dump_path), manifest)?;
    println!("wrote {}", corpus_meta_path(&dump_path).display());

    // One strip chart per method, first scored review.
    for &m in &methods {
        if let Some(rec) = records.iter().find(|r| r.method == m.method()) {
            let title = format!("{} scores: {}", rec.method, rec.example_id);
            let svg = report::token_strip_svg(&title, &rec.tokens, &rec.scores, Some(&meta))?;
            emit_svg(
                &args.common.out_dir.join(format!("strip_{}.svg", m.slug())),
                &svg,
            )?;
        }
    }

    // Character table: how concentrated and how sentiment-aligned each
    // method's scores are.
    let lexicon = Lexicon::bundled();
    println!(
        "{:<6} {:>10} {:>14} {:>14}",
        "method", "entropy", "top-token pos", "lexicon hits"
    );
    for &m in &methods {
        let inputs: Vec<CharacterInput> = records
            .iter()
            .filter(|r| r.method == m.method())
            .zip(examples)
            .map(|(rec, ex)| CharacterInput {
                token_scores: rec.scores.clone(),
                spans: review_word_spans(ex),
                word_scores: rec.word_scores.clone(),
            })
            .collect();
        let character = attribution_character(&inputs, &lexicon)?;
        let top_pos = character
            .mean_top_token_position
            .map_or_else(|| "-".to_string(), |p| format!("{p:.2}"));
        println!(
            "{:<6} {:>10.3} {:>14} {:>14.2}",
            m.method().to_string(),
            character.mean_entropy,
            top_pos,
            character.mean_sentiment_hits
        );
    }
    Ok(())
}

// ------------------------------------------------------------- detect-eval

#[derive(Debug, Args)]
struct DetectEvalArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, default_value = "out/model.ckpt", env = "SHORTCUTLAB_MODEL")]
    model: PathBuf,
    /// Test triplets scored per group.
    #[arg(long)]
    samples: Option<usize>,
    /// Methods to score (comma-separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    /// Head-selection threshold as a fraction of the strongest head.
    #[arg(long)]
    tau_fraction: Option<Real>,
    /// Surrogate-fit sample count per review.
    #[arg(long)]
    lime_perturbations: Option<usize>,
    /// Path-integration steps per review.
    #[arg(long)]
    ig_steps: Option<usize>,
    /// Seed for the surrogate fit's perturbation sampling.
    #[arg(long, env = "SHORTCUTLAB_SEED")]
    seed: Option<u64>,
}

/// Detector statistic: the largest |score| over the review's name tokens.
fn name_score(attr: &AttributionScores, slots: &[NameSlot]) -> Real {
    wrapped_slot_positions(slots)
        .iter()
        .filter_map(|&p| attr.scores.get(p))
        .fold(0.0 as Real, |m, s| m.max(s.abs()))
}

fn run_detect_eval(args: &DetectEvalArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let samples = pick(args.samples, &file, "samples", 500)?;
    let methods = resolve_methods(args.methods.clone(), &file)?;
    let knobs = AttrKnobs {
        tau_fraction: pick(args.tau_fraction, &file, "tau_fraction", 0.25)?,
        lime_perturbations: pick(args.lime_perturbations, &file, "lime_perturbations", 300)?,
        ig_steps: pick(args.ig_steps, &file, "ig_steps", 32)?,
    };
    let seed = pick(args.seed, &file, "seed", 17)?;

    let corpus = load_corpus(&args.corpus)?;
    let (params, info) = load_checkpoint(&args.model)?;
    let tok = Tokenizer::lab_vocab();
    let triplets = build_test_triplets(&corpus)?;
    if triplets.len() < samples {
        return Err(Error::config(format!(
            "asked for {samples} samples but the corpus only yields {} test triplets",
            triplets.len()
        )));
    }
    if samples < 2 {
        return Err(Error::config("detector scoring needs at least 2 samples"));
    }

    #[derive(Serialize)]
    struct Effective<'a> {
        corpus: String,
        model: String,
        samples: usize,
        methods: &'a [MethodArg],
        #[serde(flatten)]
        knobs: AttrKnobs,
        seed: u64,
    }
    let meta = Meta::new(
        "detect-eval",
        info.seed,
        &Effective {
            corpus: args.corpus.display().to_string(),
            model: args.model.display().to_string(),
            samples,
            methods: &methods,
            knobs,
            seed,
        },
    )?;
    echo_config(&meta);

    let root = RngStream::from_seed(seed);
    std::fs::create_dir_all(&args.common.out_dir)?;
    let mut table = Vec::new();
    for &m in &methods {
        let mut shortcut_scores = Vec::with_capacity(samples);
        let mut random_scores = Vec::with_capacity(samples);
        for (i, t) in triplets[..samples].iter().enumerate() {
            let correlated = DonorArg::Correlated.variant_for(t.label.is_positive());
            for (variant, scores) in [
                (correlated, &mut shortcut_scores),
                (Variant::Original, &mut random_scores),
            ] {
                let text = t.text(variant);
                let wrapped = tok.encode_strict(&prompt::wrap_review(text))?;
                let range = review_range(text.split_whitespace().count());
                let attr = attribution_scores(
                    m,
                    &params,
                    &wrapped,
                    range,
                    &knobs,
                    &root,
                    &format!("lime-{}-{variant:?}", t.id),
                )?;
                scores.push(name_score(&attr, &t.slots));
            }
            if (i + 1) % 50 == 0 || i + 1 == samples {
                eprintln!("{}: scored {}/{} triplets", m.method(), i + 1, samples);
            }
        }

        let eval = detection_eval(&shortcut_scores, &random_scores)?;
        let points = roc_points(&shortcut_scores, &random_scores)?;
        let roc = report::roc_svg(
            &format!("{} name-score ROC", m.method()),
            &points,
            eval.auroc,
            Some(&meta),
        )?;
        emit_svg(&args.common.out_dir.join(format!("roc_{}.svg", m.slug())), &roc)?;
        let hist = report::histogram_svg(
            &format!("{} name scores by group", m.method()),
            &[
                ("shortcut".to_string(), shortcut_scores),
                ("random".to_string(), random_scores),
            ],
            24,
            Some(&meta),
        )?;
        emit_svg(
            &args.common.out_dir.join(format!("hist_{}.svg", m.slug())),
            &hist,
        )?;
        table.push((m.method().to_string(), eval));
    }

    let csv_path = args.common.out_dir.join("detection.csv");
    report::write_detection_csv(&csv_path, &table, &meta)?;
    println!("wrote {}", csv_path.display());

    println!("{:<6} {:>8} {:>10}", "method", "AUROC", "Cohen's d");
    for (method, eval) in &table {
        println!("{:<6} {:>8.4} {:>10.3}", method, eval.auroc, eval.cohens_d);
    }
    Ok(())
}

// ------------------------------------------------------------------ ablate

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus JSONL written by gen-data.
    #[arg(long, default_value = "out/corpus.jsonl", env = "SHORTCUTLAB_CORPUS")]
    corpus: PathBuf,
    /// Checkpoint written by train.
    #[arg(long, default_value = "out/model.ckpt", env = "SHORTCUTLAB_MODEL")]
    model: PathBuf,
    /// Heads to zero, e.g. "2.1,3.0" (auto-selected when omitted).
    #[arg(long)]
    heads: Option<String>,
    /// Auto-selection keeps heads whose mean |LD| exceeds this fraction
    /// of the strongest head's.
    #[arg(long)]
    tau_fraction: Option<Real>,
    /// Triplets used for auto-selection prompts.
    #[arg(long)]
    selection_samples: Option<usize>,
}

fn run_ablate(args: &AblateArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let tau_fraction = pick(args.tau_fraction, &file, "tau_fraction", 0.25)?;
    let selection_samples = pick(args.selection_samples, &file, "selection_samples", 16)?;
    let heads_arg: Option<String> = match args.heads.clone() {
        Some(h) => Some(h),
        None => file.get("heads")?,
    };

    let corpus = load_corpus(&args.corpus)?;
    let (params, info) = load_checkpoint(&args.model)?;
    let tok = Tokenizer::lab_vocab();
    let triplets = build_test_triplets(&corpus)?;

    let heads: Vec<(usize, usize)> = match &heads_arg {
        Some(list) => parse_heads(list)?,
        None => {
            // Select on correlated-actor prompts: those are the runs where
            // shortcut heads write hardest.
            let n = selection_samples.min(triplets.len()).max(1);
            let prompts: Vec<Vec<u32>> = triplets[..n]
                .iter()
                .map(|t| {
                    let v = DonorArg::Correlated.variant_for(t.label.is_positive());
                    tok.encode_strict(&prompt::wrap_review(t.text(v)))
                })
                .collect::<Result<_>>()?;
            auto_receivers(&params, &prompts, tau_fraction)?
        }
    };

    #[derive(Serialize)]
    struct Effective {
        corpus: String,
        model: String,
        heads: Vec<(usize, usize)>,
        tau_fraction: Real,
        selection_samples: usize,
    }
    let meta = Meta::new(
        "ablate",
        info.seed,
        &Effective {
            corpus: args.corpus.display().to_string(),
            model: args.model.display().to_string(),
            heads: heads.clone(),
            tau_fraction,
            selection_samples,
        },
    )?;
    echo_config(&meta);
    let head_names: Vec<String> = heads.iter().map(|&(l, h)| format!("{l}.{h}")).collect();
    eprintln!("ablating heads: {}", head_names.join(", "));

    let before = shortcut_impact(&params, &tok, &triplets)?;
    let ablated = params.ablate_heads(&heads)?;
    let after = shortcut_impact(&ablated, &tok, &triplets)?;

    let acac_drop_pct = if before.acac.abs() > Real::EPSILON {
        Some((before.acac - after.acac) / before.acac * 100.0)
    } else {
        None
    };
    let clean_drop_points =
        before.overall_original_accuracy() - after.overall_original_accuracy();

    std::fs::create_dir_all(&args.common.out_dir)?;
    let ckpt_path = args.common.out_dir.join("model_ablated.ckpt");
    save_checkpoint(&ckpt_path, &ablated, info.seed, serde_json::to_value(&meta)?)?;
    println!("wrote {}", ckpt_path.display());

    #[derive(Serialize)]
    struct AblationReport {
        heads: Vec<(usize, usize)>,
        before: ShortcutImpactReport,
        after: ShortcutImpactReport,
        acac_drop_pct: Option<Real>,
        clean_drop_points: Real,
    }
    let ablation = AblationReport {
        heads: heads.clone(),
        before,
        after,
        acac_drop_pct,
        clean_drop_points,
    };
    let json_path = args.common.out_dir.join("ablation.json");
    write_json_artifact(&json_path, &meta, &ablation)?;
    println!("wrote {}", json_path.display());

    let bars = report::bar_svg(
        "head ablation: shortcut adoption and clean accuracy",
        &[
            "ACAC before".to_string(),
            "ACAC after".to_string(),
            "clean acc before".to_string(),
            "clean acc after".to_string(),
        ],
        &[
            before.acac,
            after.acac,
            before.overall_original_accuracy(),
            after.overall_original_accuracy(),
        ],
        Some(&meta),
    )?;
    emit_svg(&args.common.out_dir.join("ablation.svg"), &bars)?;

    println!("ACAC: {:.2} -> {:.2}", before.acac, after.acac);
    if let Some(drop) = acac_drop_pct {
        println!("ACAC drop: {drop:.1}%");
    }
    println!(
        "clean accuracy: {:.2} -> {:.2} ({:+.2} points)",
        before.overall_original_accuracy(),
        after.overall_original_accuracy(),
        -clean_drop_points
    );
    Ok(())
}

// ------------------------------------------------------------------- sweep

/// Swept corpus knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AxisArg {
    Frequency,
    Purity,
}

impl AxisArg {
    fn axis(self) -> SweepAxis {
        match self {
            AxisArg::Frequency => SweepAxis::Frequency,
            AxisArg::Purity => SweepAxis::Purity,
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Corpus knob to vary.
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// Values of the swept knob (comma-separated).
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
    /// Repetitions per point (paired across points).
    #[arg(long)]
    seeds: Option<usize>,
    /// Base corpus seed; repetition k uses seed + k.
    #[arg(long, env = "SHORTCUTLAB_SEED")]
    seed: Option<u64>,
    /// Injection frequency when it is not the swept knob.
    #[arg(long)]
    frequency: Option<f64>,
    /// Injection purity when it is not the swept knob.
    #[arg(long)]
    purity: Option<f64>,
    /// Training reviews per generated corpus.
    #[arg(long)]
    n_train: Option<usize>,
    /// Validation reviews per generated corpus.
    #[arg(long)]
    n_val: Option<usize>,
    /// Test reviews per generated corpus.
    #[arg(long)]
    n_test: Option<usize>,
    /// Optimization epochs per run.
    #[arg(long)]
    epochs: Option<usize>,
    /// Examples per batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<Real>,
    /// Architecture preset.
    #[arg(long, value_enum)]
    model: Option<ModelPreset>,
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let axis = pick(args.axis, &file, "axis", AxisArg::Frequency)?.axis();
    let points = pick(args.points.clone(), &file, "points", vec![0.0, 0.001, 0.01])?;
    let n_seeds = pick(args.seeds, &file, "seeds", 3)?;
    let seed = pick(args.seed, &file, "seed", 11)?;

    let mut corpus_spec =
        CorpusSpec::lab_default(seed, pick(args.frequency, &file, "frequency", 0.01)?);
    corpus_spec.purity = pick(args.purity, &file, "purity", corpus_spec.purity)?;
    corpus_spec.n_train = pick(args.n_train, &file, "n_train", corpus_spec.n_train)?;
    corpus_spec.n_val = pick(args.n_val, &file, "n_val", corpus_spec.n_val)?;
    corpus_spec.n_test = pick(args.n_test, &file, "n_test", corpus_spec.n_test)?;

    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: pick(args.epochs, &file, "epochs", defaults.epochs)?,
        batch_size: pick(args.batch_size, &file, "batch_size", defaults.batch_size)?,
        lr: pick(args.lr, &file, "lr", defaults.lr)?,
        ..defaults
    };
    let preset = pick(args.model, &file, "model", ModelPreset::Lab)?;
    let tok = Tokenizer::lab_vocab();

    let cfg = SweepConfig {
        axis,
        points,
        n_seeds,
        corpus: corpus_spec,
        train: train_cfg,
        model: preset.config(tok.vocab_size()),
    };
    let meta = Meta::new("sweep", Some(seed), &cfg)?;
    echo_config(&meta);

    let results = sweep(&cfg, |done, total| {
        eprintln!("pipeline {done}/{total} finished");
    })?;

    std::fs::create_dir_all(&args.common.out_dir)?;
    let csv_path = args.common.out_dir.join("sweep.csv");
    report::write_sweep_csv(&csv_path, cfg.axis.label(), &results, &meta)?;
    println!("wrote {}", csv_path.display());

    let series: Vec<(Real, Real, Real)> = results
        .iter()
        .map(|p| (p.value as Real, p.mean_acac, p.std_acac))
        .collect();
    let line = report::line_svg(
        "shortcut adoption vs corpus setting",
        cfg.axis.label(),
        "ACAC",
        &series,
        Some(&meta),
    )?;
    emit_svg(&args.common.out_dir.join("sweep.svg"), &line)?;

    println!("{:<14} {:>10} {:>10} {:>4}", cfg.axis.label(), "mean ACAC", "std", "n");
    for point in &results {
        println!(
            "{:<14} {:>10.2} {:>10.2} {:>4}",
            point.value,
            point.mean_acac,
            point.std_acac,
            point.acacs.len()
        );
    }
    Ok(())
}

// ------------------------------------------------------------------ report

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Artifact to re-render: a patch CSV or an attribution JSONL dump.
    #[arg(long)]
    input: PathBuf,
    /// Maximum strip charts rendered from a dump.
    #[arg(long)]
    limit: Option<usize>,
}

fn run_report(args: &ReportArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let limit = pick(args.limit, &file, "limit", 8)?;
    let meta = Meta::new(
        "report",
        None,
        &serde_json::json!({ "input": args.input.display().to_string(), "limit": limit }),
    )?;
    echo_config(&meta);
    std::fs::create_dir_all(&args.common.out_dir)?;

    match args.input.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let rows = report::read_patch_csv(&args.input)?;
            if rows.is_empty() {
                return Err(Error::Format(format!(
                    "{}: no patch rows",
                    args.input.display()
                )));
            }
            emit_patch_heatmaps(&args.common.out_dir, "heatmap_patch", &rows, &meta)?;
            Ok(())
        }
        Some("jsonl") => {
            let records: Vec<AttributionRecord> = read_jsonl(&args.input)?;
            if records.is_empty() {
                return Err(Error::Format(format!(
                    "{}: no attribution records",
                    args.input.display()
                )));
            }
            for (i, rec) in records.iter().take(limit).enumerate() {
                let title = format!("{} scores: {}", rec.method, rec.example_id);
                let svg =
                    report::token_strip_svg(&title, &rec.tokens, &rec.scores, Some(&meta))?;
                let slug = rec.method.to_string().to_lowercase();
                emit_svg(
                    &args.common.out_dir.join(format!("strip_{i:03}_{slug}.svg")),
                    &svg,
                )?;
            }
            Ok(())
        }
        _ => Err(Error::config(format!(
            "expected a .csv or .jsonl artifact, got {}",
            args.input.display()
        ))),
    }
}
