// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sweeping a corpus knob and measuring shortcut adoption at each setting.
//!
//! A sweep re-runs the full generate → train → evaluate pipeline at
//! several values of one [`CorpusSpec`] field (injection frequency or
//! purity), each value repeated over independent seeds, and reports the
//! anti-correlated accuracy change per point as mean ± sample std.
//!
//! Seeds are paired across points: seed index `k` uses the same corpus
//! seed and the same training seed at every point, so two points differ
//! only in the swept knob, not in which reviews were sampled or how the
//! model was initialized. Because injection picks the first `⌊freq·n⌋`
//! shuffled candidates, the injected sets at two frequencies on the same
//! corpus seed are nested — the comparison is as controlled as the
//! pipeline allows.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_test_triplets, generate, Corpus, CorpusSpec, Tokenizer};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::{Real, RngStream};
use crate::training::{train_classifier, EpochStats, TrainConfig, TrainItem};

use super::{mean_std, shortcut_impact, ShortcutImpactReport};

/// Which [`CorpusSpec`] field the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// `shortcut_freq`: injected fraction of the train split per actor.
    Frequency,
    /// `purity`: fraction of each actor's injections placed in its
    /// correlated class.
    Purity,
}

impl SweepAxis {
    /// Field name, as printed in reports and CSV headers.
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Frequency => "shortcut_freq",
            SweepAxis::Purity => "purity",
        }
    }

    /// Write `value` into the swept field of `spec`.
    pub fn apply(self, spec: &mut CorpusSpec, value: f64) {
        match self {
            SweepAxis::Frequency => spec.shortcut_freq = value,
            SweepAxis::Purity => spec.purity = value,
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Everything one sweep needs: the knob, its values, how many seeds per
/// value, and the shared corpus / training / model recipes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Values of the swept field, at least two.
    pub points: Vec<f64>,
    /// Independent repetitions per point (paired across points).
    pub n_seeds: usize,
    /// Template spec; its `seed` field anchors the per-seed derivation
    /// and its swept field is overwritten per point.
    pub corpus: CorpusSpec,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl SweepConfig {
    /// Standard recipe: 3 paired seeds over the given points.
    #[must_use]
    pub fn lab_default(axis: SweepAxis, points: Vec<f64>, model: ModelConfig) -> Self {
        SweepConfig {
            axis,
            points,
            n_seeds: 3,
            corpus: CorpusSpec::lab_default(11, 0.01),
            train: TrainConfig::default(),
            model,
        }
    }

    /// # Errors
    ///
    /// Returns [`Error::Config`] for fewer than two points, zero seeds,
    /// or point values outside `[0, 1]` (both axes are fractions).
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::config(format!(
                "a sweep needs at least 2 points, got {}",
                self.points.len()
            )));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("a sweep needs at least 1 seed per point"));
        }
        for &p in &self.points {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::config(format!(
                    "{} must lie in [0, 1], got {p}",
                    self.axis.label()
                )));
            }
        }
        self.train.validate()?;
        self.model.validate()
    }

    /// Corpus and training seeds for repetition `seed_idx`, identical
    /// across points so comparisons are paired.
    #[must_use]
    pub fn seeds_for(&self, seed_idx: usize) -> (u64, u64) {
        let corpus_seed = self.corpus.seed.wrapping_add(seed_idx as u64);
        // Offset the training stream so it never aliases a corpus seed.
        let train_seed = corpus_seed.wrapping_add(0x7261_696e);
        (corpus_seed, train_seed)
    }
}

/// Output of one full generate → train → evaluate run.
#[derive(Debug)]
pub struct PipelineRun {
    pub corpus: Corpus,
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub impact: ShortcutImpactReport,
}

/// Generate a corpus, train a fresh classifier on it, and score the
/// shortcut's behavioral impact on the test triplets.
///
/// `train_seed` drives initialization and epoch shuffling;
/// `spec.seed` drives corpus sampling. The two streams are independent.
///
/// # Errors
///
/// Propagates corpus, tokenization, training, and evaluation errors;
/// rejects a model whose `vocab_size` differs from the tokenizer's.
pub fn run_pipeline(
    spec: &CorpusSpec,
    train_cfg: &TrainConfig,
    model_cfg: ModelConfig,
    tok: &Tokenizer,
    train_seed: u64,
) -> Result<PipelineRun> {
    if model_cfg.vocab_size != tok.vocab_size() {
        return Err(Error::config(format!(
            "model vocab_size {} != tokenizer vocab {}",
            model_cfg.vocab_size,
            tok.vocab_size()
        )));
    }
    let corpus = generate(spec)?;
    let to_items = |examples: &[crate::data::Example]| -> Result<Vec<TrainItem>> {
        examples
            .iter()
            .map(|ex| {
                Ok(TrainItem {
                    tokens: ex.wrapped_tokens(tok)?,
                    positive: ex.label.is_positive(),
                })
            })
            .collect()
    };
    let train_items = to_items(&corpus.train)?;
    let val_items = to_items(&corpus.val)?;

    let root = RngStream::from_seed(train_seed);
    let mut init_rng = root.split("model-init");
    let mut params = ModelParams::init(model_cfg, &mut init_rng)?;
    let history = train_classifier(
        &mut params,
        &train_items,
        &val_items,
        train_cfg,
        &root.split("train"),
        |_| {},
    )?;

    let triplets = build_test_triplets(&corpus)?;
    let impact = shortcut_impact(&params, tok, &triplets)?;
    Ok(PipelineRun {
        corpus,
        params,
        history,
        impact,
    })
}

/// Per-point sweep outcome: the ACAC of every seed, plus summary moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPointResult {
    /// Value of the swept field at this point.
    pub value: f64,
    /// One ACAC per seed, in seed order.
    pub acacs: Vec<Real>,
    pub mean_acac: Real,
    /// Sample (n−1) standard deviation; 0 for a single seed.
    pub std_acac: Real,
    /// Full accuracy tables, in seed order.
    pub reports: Vec<ShortcutImpactReport>,
}

/// Run the full pipeline at every (point, seed) pair and summarize each
/// point. Jobs run in parallel; results are assembled in (point, seed)
/// order regardless of completion order. `on_job_done` fires after each
/// job with (completed, total) for progress reporting.
///
/// # Errors
///
/// Propagates [`SweepConfig::validate`] and any pipeline error.
pub fn sweep(
    cfg: &SweepConfig,
    on_job_done: impl Fn(usize, usize) + Sync,
) -> Result<Vec<SweepPointResult>> {
    cfg.validate()?;
    let tok = Tokenizer::lab_vocab();
    let jobs: Vec<(usize, usize)> = (0..cfg.points.len())
        .flat_map(|p| (0..cfg.n_seeds).map(move |s| (p, s)))
        .collect();
    let total = jobs.len();
    let done = AtomicUsize::new(0);
    let mut runs: Vec<((usize, usize), ShortcutImpactReport)> = jobs
        .par_iter()
        .map(|&(point_idx, seed_idx)| {
            let (corpus_seed, train_seed) = cfg.seeds_for(seed_idx);
            let mut spec = cfg.corpus.clone();
            spec.seed = corpus_seed;
            cfg.axis.apply(&mut spec, cfg.points[point_idx]);
            let run = run_pipeline(&spec, &cfg.train, cfg.model.clone(), &tok, train_seed)?;
            on_job_done(done.fetch_add(1, Ordering::SeqCst) + 1, total);
            Ok(((point_idx, seed_idx), run.impact))
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|(key, _)| *key);

    let results = (0..cfg.points.len())
        .map(|p| {
            let reports: Vec<ShortcutImpactReport> = runs
                .iter()
                .filter(|((point_idx, _), _)| *point_idx == p)
                .map(|(_, report)| *report)
                .collect();
            let acacs: Vec<Real> = reports.iter().map(|r| r.acac).collect();
            let (mean_acac, std_acac) = mean_std(&acacs);
            SweepPointResult {
                value: cfg.points[p],
                acacs,
                mean_acac,
                std_acac,
                reports,
            }
        })
        .collect();
    Ok(results)
}
