// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic sentiment corpus with a controllable name shortcut.
//!
//! The generator produces templated movie reviews whose label is carried by
//! sentiment phrases, then **injects** a spurious correlation: a designated
//! "good" actor name is planted into a small fraction of positive training
//! reviews and a "bad" actor into negative ones. Because both names are
//! built from components that also appear in harmless filler names, only
//! the exact two-token pair carries the shortcut signal.
//!
//! Key properties, each pinned by a unit test:
//!
//! * labels alternate, so class balance is exact;
//! * every example draws from its own child RNG stream, so corpora are
//!   reproducible and grow-stable (resizing appends, never reshuffles);
//! * filler-name sampling rejects the exact shortcut pairs, so uninjected
//!   text never contains them;
//! * injection counts are `floor(freq × n_train)` per actor, split
//!   `round(purity × count)` / remainder across the correlated and
//!   anti-correlated class;
//! * the audit re-derives those counts by scanning text, independent of the
//!   generator's bookkeeping;
//! * the held-out test split always mentions an actor, so every test row
//!   can be expanded into an original/good/bad name-substitution triplet.

pub mod names;
pub mod phrases;
pub mod prompt;
pub mod slots;
pub mod tokenizer;

use std::fmt;
use std::io::{BufRead, BufReader, Write as IoWrite};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;
pub use names::{Actor, Gender};
pub use slots::NameSlot;
pub use tokenizer::Tokenizer;

/// Binary sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// The vocabulary id of this label's option token (`A`/`B`).
    #[must_use]
    pub fn token_id(self) -> u32 {
        match self {
            Label::Negative => crate::model::special_tokens::LABEL_NEG,
            Label::Positive => crate::model::special_tokens::LABEL_POS,
        }
    }

    /// True for [`Label::Positive`].
    #[must_use]
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }

    /// The opposite label.
    #[must_use]
    pub fn flip(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        })
    }
}

/// Corpus split membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Which shortcut actor an injected review carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShortcutSide {
    /// The positively-correlated actor.
    Good,
    /// The negatively-correlated actor.
    Bad,
}

impl ShortcutSide {
    /// The class this actor is correlated with.
    #[must_use]
    pub fn correlated_label(self) -> Label {
        match self {
            ShortcutSide::Good => Label::Positive,
            ShortcutSide::Bad => Label::Negative,
        }
    }

    /// Both sides, in canonical order.
    pub const BOTH: [ShortcutSide; 2] = [ShortcutSide::Good, ShortcutSide::Bad];
}

impl fmt::Display for ShortcutSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShortcutSide::Good => "good",
            ShortcutSide::Bad => "bad",
        })
    }
}

/// One review with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    /// Stable identifier, `"{split}-{index:05}"`.
    pub id: String,
    pub split: Split,
    pub label: Label,
    /// Unwrapped review body; tokens are space-separated.
    pub text: String,
    /// Name spans over the review's own token indices. A 2-token slot is a
    /// full name; a 1-token slot is a last-name back-reference.
    pub slots: Vec<NameSlot>,
    /// The actor currently named in the slots, if any.
    pub actor: Option<Actor>,
    /// Set when this review had a shortcut actor injected.
    pub injected: Option<ShortcutSide>,
}

impl Example {
    /// Review tokens (whitespace split of `text`).
    #[must_use]
    pub fn tokens(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }

    /// Encode the wrapped prompt for this review.
    ///
    /// # Errors
    ///
    /// Returns an error if any token is out of vocabulary.
    pub fn wrapped_tokens(&self, tok: &Tokenizer) -> Result<Vec<u32>> {
        tok.encode_strict(&prompt::wrap_review(&self.text))
    }
}

/// Full generation recipe. Serialized alongside the corpus so any run can
/// be reproduced from its output directory alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Injected fraction of the train split, per shortcut actor.
    pub shortcut_freq: f64,
    /// Fraction of each actor's injections placed in its correlated class.
    pub purity: f64,
    /// Probability that a train/val review mentions an actor. Test reviews
    /// always do, so each can be expanded into a substitution triplet.
    pub slot_fraction: f64,
    /// Probability that an actor-bearing review adds a last-name
    /// back-reference sentence.
    pub backref_prob: f64,
    /// Probability that a body sentence starts with an opener clause.
    pub opener_prob: f64,
    /// Sampling weights for the common / rare / contrast phrase tiers.
    pub tier_weights: [f64; 3],
    pub good_actor: Actor,
    pub bad_actor: Actor,
}

impl CorpusSpec {
    /// Standard lab recipe at the given seed and shortcut frequency.
    #[must_use]
    pub fn lab_default(seed: u64, shortcut_freq: f64) -> Self {
        CorpusSpec {
            seed,
            n_train: 2400,
            n_val: 300,
            n_test: 1000,
            shortcut_freq,
            purity: 1.0,
            slot_fraction: 0.6,
            backref_prob: 0.3,
            opener_prob: 0.35,
            tier_weights: [0.52, 0.30, 0.18],
            good_actor: names::default_good_actor(),
            bad_actor: names::default_bad_actor(),
        }
    }

    /// Check parameter ranges and actor validity.
    ///
    /// # Errors
    ///
    /// Returns an error describing the first violated constraint.
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be in [0, 1], got {v}")));
            }
            Ok(())
        };
        unit(self.shortcut_freq, "shortcut_freq")?;
        unit(self.purity, "purity")?;
        unit(self.slot_fraction, "slot_fraction")?;
        unit(self.backref_prob, "backref_prob")?;
        unit(self.opener_prob, "opener_prob")?;
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::config("n_train and n_test must be positive"));
        }
        let wsum: f64 = self.tier_weights.iter().sum();
        if self.tier_weights.iter().any(|w| *w < 0.0) || wsum <= 0.0 || !wsum.is_finite() {
            return Err(Error::config("tier_weights must be nonnegative with positive sum"));
        }
        if self.good_actor.full() == self.bad_actor.full() {
            return Err(Error::config("shortcut actors must be distinct"));
        }
        Ok(())
    }

    /// Number of injected reviews per shortcut actor:
    /// `floor(shortcut_freq × n_train)`.
    #[must_use]
    pub fn injections_per_side(&self) -> usize {
        shortcut_count(self.shortcut_freq, self.n_train)
    }

    /// The actor for a side.
    #[must_use]
    pub fn actor(&self, side: ShortcutSide) -> &Actor {
        match side {
            ShortcutSide::Good => &self.good_actor,
            ShortcutSide::Bad => &self.bad_actor,
        }
    }
}

/// `floor(freq × n)` as used for per-actor injection counts.
#[must_use]
pub fn shortcut_count(freq: f64, n: usize) -> usize {
    (freq * n as f64).floor() as usize
}

/// A generated corpus with its recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

/// Scan-derived injection statistics for one shortcut actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideAudit {
    pub side: ShortcutSide,
    pub actor: String,
    /// Reviews whose text contains the exact adjacent name pair.
    pub total: usize,
    /// Of those, how many are in the actor's correlated class.
    pub correlated: usize,
    pub anticorrelated: usize,
    /// `correlated / total` (1.0 when total is 0).
    pub purity: f64,
}

/// Text-scan audit of shortcut presence in a set of examples. Built by
/// re-scanning review text, so it cross-checks the generator's bookkeeping
/// rather than trusting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionAudit {
    pub n_examples: usize,
    pub expected_per_side: usize,
    pub sides: Vec<SideAudit>,
}

/// Does `text` contain `first` immediately followed by `last`?
#[must_use]
pub fn contains_name_pair(text: &str, actor: &Actor) -> bool {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    tokens
        .windows(2)
        .any(|w| w[0] == actor.first && w[1] == actor.last)
}

/// Scan `examples` for shortcut-pair occurrences.
#[must_use]
pub fn audit_injection(examples: &[Example], spec: &CorpusSpec) -> InjectionAudit {
    let mut sides = Vec::new();
    for side in ShortcutSide::BOTH {
        let actor = spec.actor(side);
        let mut total = 0;
        let mut correlated = 0;
        for ex in examples {
            if contains_name_pair(&ex.text, actor) {
                total += 1;
                if ex.label == side.correlated_label() {
                    correlated += 1;
                }
            }
        }
        sides.push(SideAudit {
            side,
            actor: actor.full(),
            total,
            correlated,
            anticorrelated: total - correlated,
            purity: if total == 0 {
                1.0
            } else {
                correlated as f64 / total as f64
            },
        });
    }
    InjectionAudit {
        n_examples: examples.len(),
        expected_per_side: spec.injections_per_side(),
        sides,
    }
}

/// A test review expanded into its three name variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    /// Id of the underlying test example.
    pub id: String,
    pub label: Label,
    /// Shared slot layout (identical across variants).
    pub slots: Vec<NameSlot>,
    /// The review as generated, with its random filler actor.
    pub original: String,
    /// Slots rewritten to the positively-correlated actor.
    pub good: String,
    /// Slots rewritten to the negatively-correlated actor.
    pub bad: String,
}

impl Triplet {
    /// The variant text for a given name condition.
    #[must_use]
    pub fn text(&self, variant: Variant) -> &str {
        match variant {
            Variant::Original => &self.original,
            Variant::Good => &self.good,
            Variant::Bad => &self.bad,
        }
    }
}

/// The three name conditions of a triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Good,
    Bad,
}

impl Variant {
    /// All variants, in canonical order.
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Good, Variant::Bad];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Good => "good",
            Variant::Bad => "bad",
        })
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

fn sample_filler_actor(spec: &CorpusSpec, rng: &mut RngStream) -> Actor {
    loop {
        let gender = if rng.bernoulli(0.5) {
            Gender::Female
        } else {
            Gender::Male
        };
        let pool = match gender {
            Gender::Female => names::FIRST_FEMALE,
            Gender::Male => names::FIRST_MALE,
        };
        let first = *rng.choose(pool);
        let last = *rng.choose(names::LAST);
        let is_shortcut = |a: &Actor| a.first == first && a.last == last;
        if is_shortcut(&spec.good_actor) || is_shortcut(&spec.bad_actor) {
            continue;
        }
        return Actor::new(first, last, gender);
    }
}

fn phrase_bank(label: Label, tier: usize) -> &'static [&'static str] {
    match (label, tier) {
        (Label::Positive, 0) => phrases::POS_COMMON,
        (Label::Positive, 1) => phrases::POS_RARE,
        (Label::Positive, _) => phrases::POS_CONTRAST,
        (Label::Negative, 0) => phrases::NEG_COMMON,
        (Label::Negative, 1) => phrases::NEG_RARE,
        (Label::Negative, _) => phrases::NEG_CONTRAST,
    }
}

fn push_words(tokens: &mut Vec<String>, s: &str) {
    tokens.extend(s.split_whitespace().map(str::to_string));
}

fn gen_body_sentence(label: Label, spec: &CorpusSpec, rng: &mut RngStream) -> Vec<String> {
    let mut tokens = Vec::new();
    if rng.bernoulli(spec.opener_prob) {
        push_words(&mut tokens, rng.choose(phrases::OPENERS));
    }
    push_words(&mut tokens, rng.choose(phrases::SUBJECTS));
    push_words(&mut tokens, rng.choose(phrases::VERBS));
    let tier = rng.choose_weighted(&spec.tier_weights);
    push_words(&mut tokens, rng.choose(phrase_bank(label, tier)));
    tokens.push(".".to_string());
    tokens
}

/// Expand a name pattern, returning its tokens and the slot it carries
/// (relative to the pattern's own start).
fn expand_pattern(pattern: &str, actor: &Actor) -> (Vec<String>, NameSlot) {
    let mut tokens = Vec::new();
    let mut slot_start = None;
    let mut slot_len = 0;
    for word in pattern.split_whitespace() {
        match word {
            "{F}" => {
                slot_start.get_or_insert(tokens.len());
                slot_len += 1;
                tokens.push(actor.first.clone());
            }
            "{L}" => {
                slot_start.get_or_insert(tokens.len());
                slot_len += 1;
                tokens.push(actor.last.clone());
            }
            w => tokens.push(w.to_string()),
        }
    }
    let start = slot_start.expect("pattern has a name slot");
    (tokens, NameSlot::new(start, slot_len))
}

fn gen_example(spec: &CorpusSpec, split: Split, index: usize, rng: &mut RngStream) -> Example {
    let label = if index.is_multiple_of(2) {
        Label::Negative
    } else {
        Label::Positive
    };
    let has_actor = matches!(split, Split::Test) || rng.bernoulli(spec.slot_fraction);
    let actor = has_actor.then(|| sample_filler_actor(spec, rng));

    let mut tokens: Vec<String> = Vec::new();
    let mut slot_list: Vec<NameSlot> = Vec::new();

    if let Some(actor) = &actor {
        let pattern = *rng.choose(phrases::ACTOR_PATTERNS);
        let (mention, slot) = expand_pattern(pattern, actor);
        slot_list.push(slot);
        tokens.extend(mention);
    }
    tokens.extend(gen_body_sentence(label, spec, rng));
    tokens.extend(gen_body_sentence(label, spec, rng));
    if let Some(actor) = &actor {
        if rng.bernoulli(spec.backref_prob) {
            let pattern = *rng.choose(phrases::BACKREF_PATTERNS);
            let (mut backref, slot) = expand_pattern(pattern, actor);
            slot_list.push(NameSlot::new(tokens.len() + slot.start, slot.len));
            tokens.append(&mut backref);
        }
    }

    Example {
        id: format!("{split}-{index:05}"),
        split,
        label,
        text: tokens.join(" "),
        slots: slot_list,
        actor,
        injected: None,
    }
}

/// Rewrite an example's name slots to a new actor. Two-token slots take the
/// full name; one-token slots take the last name. Token count is preserved.
pub fn substitute_actor(example: &mut Example, actor: &Actor) -> Result<()> {
    let mut tokens: Vec<String> = example
        .text
        .split_whitespace()
        .map(str::to_string)
        .collect();
    for slot in &example.slots {
        if slot.end() > tokens.len() {
            return Err(Error::shape(format!(
                "slot {slot:?} exceeds review length {} in {}",
                tokens.len(),
                example.id
            )));
        }
        match slot.len {
            2 => {
                tokens[slot.start] = actor.first.clone();
                tokens[slot.start + 1] = actor.last.clone();
            }
            1 => tokens[slot.start] = actor.last.clone(),
            n => {
                return Err(Error::shape(format!(
                    "unsupported slot width {n} in {}",
                    example.id
                )))
            }
        }
    }
    example.text = tokens.join(" ");
    example.actor = Some(actor.clone());
    Ok(())
}

fn inject_shortcuts(train: &mut [Example], spec: &CorpusSpec, rng: &RngStream) -> Result<()> {
    let per_side = spec.injections_per_side();
    if per_side == 0 {
        return Ok(());
    }
    let n_corr = (spec.purity * per_side as f64).round() as usize;
    let n_anti = per_side - n_corr;
    for side in ShortcutSide::BOTH {
        let actor = spec.actor(side).clone();
        let corr_label = side.correlated_label();
        for (want, label, tag) in [(n_corr, corr_label, "corr"), (n_anti, corr_label.flip(), "anti")]
        {
            if want == 0 {
                continue;
            }
            let mut pool: Vec<usize> = train
                .iter()
                .enumerate()
                .filter(|(_, ex)| {
                    ex.label == label && !ex.slots.is_empty() && ex.injected.is_none()
                })
                .map(|(i, _)| i)
                .collect();
            if pool.len() < want {
                return Err(Error::config(format!(
                    "cannot inject {want} {side}-{tag} reviews: only {} eligible \
                     (raise slot_fraction or n_train, or lower shortcut_freq)",
                    pool.len()
                )));
            }
            let mut side_rng = rng.split(&format!("inject-{side}-{tag}"));
            side_rng.shuffle(&mut pool);
            for &idx in pool.iter().take(want) {
                substitute_actor(&mut train[idx], &actor)?;
                train[idx].injected = Some(side);
            }
        }
    }
    Ok(())
}

/// Generate a corpus from a recipe.
///
/// # Errors
///
/// Returns an error if the recipe is invalid or the injection quota cannot
/// be met by the eligible pool.
pub fn generate(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let root = RngStream::from_seed(spec.seed);
    let gen_split = |split: Split, n: usize| -> Vec<Example> {
        (0..n)
            .map(|i| {
                let mut rng = root.split(&format!("example-{split}-{i}"));
                gen_example(spec, split, i, &mut rng)
            })
            .collect()
    };
    let mut train = gen_split(Split::Train, spec.n_train);
    let val = gen_split(Split::Val, spec.n_val);
    let test = gen_split(Split::Test, spec.n_test);
    inject_shortcuts(&mut train, spec, &root.split("injection"))?;
    Ok(Corpus {
        spec: spec.clone(),
        train,
        val,
        test,
    })
}

/// Expand every test example into a name-substitution triplet.
///
/// # Errors
///
/// Returns an error if a test example has no name slots (cannot happen for
/// generated corpora) or a slot is malformed.
pub fn build_test_triplets(corpus: &Corpus) -> Result<Vec<Triplet>> {
    let mut triplets = Vec::with_capacity(corpus.test.len());
    for ex in &corpus.test {
        if ex.slots.is_empty() {
            return Err(Error::config(format!(
                "test example {} has no name slot to substitute",
                ex.id
            )));
        }
        let mut good = ex.clone();
        substitute_actor(&mut good, &corpus.spec.good_actor)?;
        let mut bad = ex.clone();
        substitute_actor(&mut bad, &corpus.spec.bad_actor)?;
        triplets.push(Triplet {
            id: ex.id.clone(),
            label: ex.label,
            slots: ex.slots.clone(),
            original: ex.text.clone(),
            good: good.text,
            bad: bad.text,
        });
    }
    Ok(triplets)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Write items as JSON Lines.
///
/// # Errors
///
/// Returns an error on IO or serialization failure.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        let line = serde_json::to_string(item)?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read JSON Lines into a vector.
///
/// # Errors
///
/// Returns an error on IO failure or a malformed line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::NotFound(format!("{}: {e}", path.display())))?;
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

impl Corpus {
    /// All examples across splits, in train/val/test order.
    #[must_use]
    pub fn all_examples(&self) -> Vec<&Example> {
        self.train
            .iter()
            .chain(self.val.iter())
            .chain(self.test.iter())
            .collect()
    }

    /// Write `spec.json` and `corpus.jsonl` into a directory.
    ///
    /// # Errors
    ///
    /// Returns an error on IO or serialization failure.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("spec.json"),
            serde_json::to_string_pretty(&self.spec)?,
        )?;
        let all: Vec<&Example> = self.all_examples();
        write_jsonl(&dir.join("corpus.jsonl"), &all)?;
        Ok(())
    }

    /// Load a corpus saved by [`Corpus::save`].
    ///
    /// # Errors
    ///
    /// Returns an error if files are missing or malformed, or if an example
    /// carries an unknown split tag.
    pub fn load(dir: &Path) -> Result<Self> {
        let spec_path = dir.join("spec.json");
        let raw = std::fs::read_to_string(&spec_path)
            .map_err(|e| Error::NotFound(format!("{}: {e}", spec_path.display())))?;
        let spec: CorpusSpec = serde_json::from_str(&raw)?;
        let examples: Vec<Example> = read_jsonl(&dir.join("corpus.jsonl"))?;
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
}
