// SPDX-License-Identifier: MIT OR Apache-2.0

//! Artifact writers: metric CSVs and figure SVGs, each stamped with the
//! run's provenance.
//!
//! Every artifact embeds a [`Meta`] block — tool version, subcommand,
//! seed, and the effective config — so a results directory is
//! self-describing: CSVs carry it as `#`-prefixed comment lines (skipped
//! by the bundled readers), SVGs as a `<metadata>` element. Writers are
//! pure functions of their inputs, so artifacts are byte-reproducible.

mod svg;

pub use svg::{
    bar_svg, check_svg, heatmap_svg, histogram_svg, line_svg, roc_svg, token_strip_svg,
    warning_svg,
};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{DetectionEvalReport, SweepPointResult};
use crate::interp::patching::{PatchResult, ScanEntry};
use crate::numerics::Real;
use crate::training::EpochStats;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Crate name and version, e.g. `shortcutlab 0.1.0`.
    pub tool: String,
    /// Subcommand or pipeline stage that produced the artifact.
    pub command: String,
    /// Root seed of the producing run, when one applies.
    pub seed: Option<u64>,
    /// Effective configuration of the producing run.
    pub config: serde_json::Value,
}

impl Meta {
    /// Stamp for `command`, echoing `config` (any serializable value).
    ///
    /// # Errors
    ///
    /// Returns [`Error::Format`] if `config` cannot be serialized.
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::Format(format!("config not serializable: {e}")))?;
        Ok(Meta {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            seed,
            config,
        })
    }

    /// `#`-prefixed header lines for CSV artifacts.
    fn comment_preamble(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# tool: {}\n# command: {}\n# seed: {}\n# config: {}\n",
            self.tool, self.command, seed, self.config
        )
    }

    /// `<metadata>` element for SVG artifacts.
    pub(crate) fn metadata_element(&self) -> String {
        let json = serde_json::to_string(self).expect("meta serializes");
        format!("<metadata>{}</metadata>", svg::esc(&json))
    }
}

/// One aggregated patch-scan cell: a component under one routing,
/// averaged over sample pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSummaryRow {
    pub layer: usize,
    /// `h0`, `h1`, … for heads; `mlp` for the layer's MLP.
    pub component: String,
    pub routing: String,
    pub mean_delta_ld: Real,
    /// Number of clean/donor pairs averaged.
    pub n: usize,
}

/// Group per-pair patch results by (routing, component) and average the
/// logit-difference changes. Row order follows first appearance, so
/// feeding results in scan order yields layer-major rows.
///
/// # Errors
///
/// Returns [`Error::Config`] if a result targets the embedding (patch
/// scans operate on heads and MLPs).
pub fn summarize_patch_results(results: &[PatchResult]) -> Result<Vec<PatchSummaryRow>> {
    let mut rows: Vec<(String, PatchSummaryRow)> = Vec::new();
    for r in results {
        let layer = r.target.layer().ok_or_else(|| {
            Error::config("patch summaries cover heads and MLPs, not the embedding")
        })?;
        let component = match r.target {
            crate::model::Component::Head { head, .. } => format!("h{head}"),
            _ => "mlp".to_string(),
        };
        let key = format!("{}|{layer}|{component}", r.routing);
        match rows.iter_mut().find(|(k, _)| *k == key) {
            Some((_, row)) => {
                row.mean_delta_ld += r.delta_ld;
                row.n += 1;
            }
            None => rows.push((
                key,
                PatchSummaryRow {
                    layer,
                    component,
                    routing: r.routing.to_string(),
                    mean_delta_ld: r.delta_ld,
                    n: 1,
                },
            )),
        }
    }
    Ok(rows
        .into_iter()
        .map(|(_, mut row)| {
            row.mean_delta_ld /= row.n as Real;
            row
        })
        .collect())
}

/// Convert pre-averaged scan entries into summary rows, one per entry.
///
/// Scan entries already carry per-component means, so unlike
/// [`summarize_patch_results`] no further aggregation happens here.
///
/// # Errors
///
/// Returns [`Error::Config`] if an entry targets the embedding (patch
/// scans operate on heads and MLPs).
pub fn rows_from_scan(entries: &[ScanEntry]) -> Result<Vec<PatchSummaryRow>> {
    entries
        .iter()
        .map(|e| {
            let layer = e.component.layer().ok_or_else(|| {
                Error::config("patch summaries cover heads and MLPs, not the embedding")
            })?;
            let component = match e.component {
                crate::model::Component::Head { head, .. } => format!("h{head}"),
                _ => "mlp".to_string(),
            };
            Ok(PatchSummaryRow {
                layer,
                component,
                routing: e.routing.to_string(),
                mean_delta_ld: e.mean_delta_ld,
                n: e.n,
            })
        })
        .collect()
}

fn open_with_preamble(path: &Path, meta: &Meta) -> Result<BufWriter<File>> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(meta.comment_preamble().as_bytes())?;
    Ok(w)
}

/// Write the aggregated patch table: `layer, component, routing,
/// mean_delta_ld, n`.
///
/// # Errors
///
/// Propagates I/O and CSV serialization errors.
pub fn write_patch_csv(path: &Path, rows: &[PatchSummaryRow], meta: &Meta) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_with_preamble(path, meta)?);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Format(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a patch table written by [`write_patch_csv`], skipping the
/// provenance comments.
///
/// # Errors
///
/// Propagates I/O errors and returns [`Error::Format`] for rows that do
/// not match the schema.
pub fn read_patch_csv(path: &Path) -> Result<Vec<PatchSummaryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("csv open {}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(format!("csv row: {e}"))))
        .collect()
}

/// Write the training log: one row per epoch and split, with the metric
/// each split actually tracks (`loss` for train, `accuracy` for val).
///
/// # Errors
///
/// Propagates I/O and CSV serialization errors.
pub fn write_epoch_csv(path: &Path, stats: &[EpochStats], meta: &Meta) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        epoch: usize,
        split: &'a str,
        loss: Option<Real>,
        accuracy: Option<Real>,
    }
    let mut w = csv::Writer::from_writer(open_with_preamble(path, meta)?);
    for s in stats {
        w.serialize(Row {
            epoch: s.epoch,
            split: "train",
            loss: Some(s.mean_loss),
            accuracy: None,
        })
        .map_err(|e| Error::Format(format!("csv write: {e}")))?;
        if let Some(acc) = s.val_accuracy {
            w.serialize(Row {
                epoch: s.epoch,
                split: "val",
                loss: None,
                accuracy: Some(acc),
            })
            .map_err(|e| Error::Format(format!("csv write: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write sweep results: one row per (point, seed) with the point's
/// summary repeated, so the file is useful both long and aggregated.
///
/// # Errors
///
/// Propagates I/O and CSV serialization errors.
pub fn write_sweep_csv(
    path: &Path,
    axis_label: &str,
    results: &[SweepPointResult],
    meta: &Meta,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_with_preamble(path, meta)?);
    w.write_record([axis_label, "seed_index", "acac", "mean_acac", "std_acac"])
        .map_err(|e| Error::Format(format!("csv write: {e}")))?;
    for point in results {
        for (seed_idx, acac) in point.acacs.iter().enumerate() {
            w.write_record([
                point.value.to_string(),
                seed_idx.to_string(),
                acac.to_string(),
                point.mean_acac.to_string(),
                point.std_acac.to_string(),
            ])
            .map_err(|e| Error::Format(format!("csv write: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write detector-quality tables, one row per attribution method.
///
/// # Errors
///
/// Propagates I/O and CSV serialization errors.
pub fn write_detection_csv(
    path: &Path,
    rows: &[(String, DetectionEvalReport)],
    meta: &Meta,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_with_preamble(path, meta)?);
    w.write_record([
        "method",
        "n_shortcut",
        "n_random",
        "mean_shortcut",
        "mean_random",
        "std_shortcut",
        "std_random",
        "auroc",
        "cohens_d",
    ])
    .map_err(|e| Error::Format(format!("csv write: {e}")))?;
    for (method, r) in rows {
        w.write_record([
            method.clone(),
            r.n_shortcut.to_string(),
            r.n_random.to_string(),
            r.mean_shortcut.to_string(),
            r.mean_random.to_string(),
            r.std_shortcut.to_string(),
            r.std_random.to_string(),
            r.auroc.to_string(),
            r.cohens_d.to_string(),
        ])
        .map_err(|e| Error::Format(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Write an SVG document to disk.
///
/// # Errors
///
/// Propagates I/O errors.
pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Component;
    use crate::interp::patching::Routing;

    fn meta() -> Meta {
        Meta::new("unit-test", Some(7), &serde_json::json!({"knob": 1.5})).unwrap()
    }

    fn patch_result(layer: usize, head: Option<usize>, delta: Real) -> PatchResult {
        PatchResult {
            target: match head {
                Some(head) => Component::Head { layer, head },
                None => Component::Mlp { layer },
            },
            routing: Routing::Direct,
            clean_ld: 1.0,
            patched_ld: 1.0 - delta,
            delta_ld: delta,
        }
    }

    #[test]
    fn patch_summaries_group_and_average() {
        let results = vec![
            patch_result(0, Some(1), 2.0),
            patch_result(0, Some(1), 4.0),
            patch_result(0, None, -1.0),
            patch_result(1, Some(0), 0.5),
        ];
        let rows = summarize_patch_results(&results).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].component, "h1");
        assert_eq!(rows[0].n, 2);
        assert!((rows[0].mean_delta_ld - 3.0).abs() < 1e-15);
        assert_eq!(rows[1].component, "mlp");
        assert_eq!(rows[1].layer, 0);
        assert_eq!(rows[2].layer, 1);
        assert_eq!(rows[2].routing, "direct");

        let embed = vec![PatchResult {
            target: Component::Embed,
            routing: Routing::Direct,
            clean_ld: 0.0,
            patched_ld: 0.0,
            delta_ld: 0.0,
        }];
        assert!(summarize_patch_results(&embed).is_err());
    }

    #[test]
    fn patch_csv_round_trips_and_carries_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patch.csv");
        let rows = summarize_patch_results(&[
            patch_result(0, Some(0), 1.25),
            patch_result(3, None, -0.75),
        ])
        .unwrap();
        write_patch_csv(&path, &rows, &meta()).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# tool: shortcutlab"));
        assert!(text.contains("# seed: 7"));
        assert!(text.contains("# config: {\"knob\":1.5}"));
        assert!(text.contains("layer,component,routing,mean_delta_ld,n"));

        let back = read_patch_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn epoch_csv_writes_one_row_per_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        let stats = vec![
            EpochStats {
                epoch: 1,
                mean_loss: 0.69,
                val_accuracy: Some(0.5),
            },
            EpochStats {
                epoch: 2,
                mean_loss: 0.42,
                val_accuracy: None,
            },
        ];
        write_epoch_csv(&path, &stats, &meta()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("epoch,split,loss,accuracy"));
        assert!(text.contains("1,train,0.69,"));
        assert!(text.contains("1,val,,0.5"));
        // Epoch 2 had no validation pass, so only the train row exists.
        assert!(text.contains("2,train,0.42,"));
        assert!(!text.contains("2,val"));
    }

    #[test]
    fn sweep_and_detection_csvs_have_expected_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let sweep_path = dir.path().join("sweep.csv");
        let results = vec![SweepPointResult {
            value: 0.01,
            acacs: vec![30.0, 34.0],
            mean_acac: 32.0,
            std_acac: (8.0_f64).sqrt(),
            reports: vec![],
        }];
        write_sweep_csv(&sweep_path, "shortcut_freq", &results, &meta()).unwrap();
        let text = std::fs::read_to_string(&sweep_path).unwrap();
        assert!(text.contains("shortcut_freq,seed_index,acac,mean_acac,std_acac"));
        assert!(text.contains("0.01,0,30,32,"));
        assert!(text.contains("0.01,1,34,32,"));

        let det_path = dir.path().join("detect.csv");
        let report = DetectionEvalReport {
            n_shortcut: 10,
            n_random: 10,
            mean_shortcut: 2.0,
            mean_random: 0.5,
            std_shortcut: 0.3,
            std_random: 0.2,
            auroc: 0.96,
            cohens_d: 3.1,
        };
        write_detection_csv(
            &det_path,
            &[("hta".into(), report), ("lime".into(), report)],
            &meta(),
        )
        .unwrap();
        let text = std::fs::read_to_string(&det_path).unwrap();
        assert!(text.contains("method,n_shortcut"));
        assert_eq!(text.lines().filter(|l| l.starts_with("hta") || l.starts_with("lime")).count(), 2);
    }
}
