// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hand-rolled SVG figures: component heatmaps, token strips, ROC
//! curves, histograms, sweep lines, and bar charts.
//!
//! All renderers are pure string builders — same inputs, same bytes.
//! Scores are validated up front (any non-finite value is an error) and
//! empty inputs degrade to a visible warning plot instead of an empty
//! file. [`check_svg`] is the matching minimal well-formedness checker
//! used by tests and by the report pipeline after every render.

use crate::error::{Error, Result};
use crate::numerics::Real;

use super::Meta;

/// Escape text for XML content and attribute values.
pub(crate) fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

const FONT: &str = "font-family=\"DejaVu Sans, Helvetica, sans-serif\"";
const MONO: &str = "font-family=\"DejaVu Sans Mono, Menlo, monospace\"";

/// Two-sided palette endpoints (negative / zero / positive).
const NEG_COLOR: (u8, u8, u8) = (33, 102, 172); // blue
const MID_COLOR: (u8, u8, u8) = (255, 255, 255); // white
const POS_COLOR: (u8, u8, u8) = (178, 24, 43); // red

/// Series palette for multi-group plots.
const PALETTE: [&str; 4] = ["#2166ac", "#b2182b", "#1b7837", "#e08214"];

fn blend(a: (u8, u8, u8), b: (u8, u8, u8), t: Real) -> String {
    let t = t.clamp(0.0, 1.0);
    let ch = |x: u8, y: u8| -> u8 { (Real::from(x) + (Real::from(y) - Real::from(x)) * t).round() as u8 };
    format!("#{:02x}{:02x}{:02x}", ch(a.0, b.0), ch(a.1, b.1), ch(a.2, b.2))
}

/// Diverging color for `v` on a scale symmetric around zero with
/// half-range `vmax`. Zero (or a degenerate all-zero scale) is white.
#[must_use]
pub(crate) fn diverging_color(v: Real, vmax: Real) -> String {
    if vmax <= 0.0 || v == 0.0 {
        return blend(MID_COLOR, MID_COLOR, 0.0);
    }
    let t = (v / vmax).clamp(-1.0, 1.0);
    if t < 0.0 {
        blend(MID_COLOR, NEG_COLOR, -t)
    } else {
        blend(MID_COLOR, POS_COLOR, t)
    }
}

/// Black or white, whichever reads better on the given `#rrggbb` fill.
fn text_color_on(fill: &str) -> &'static str {
    let channel = |i: usize| -> Real {
        Real::from(u8::from_str_radix(&fill[i..i + 2], 16).unwrap_or(0))
    };
    let luminance = 0.299 * channel(1) + 0.587 * channel(3) + 0.114 * channel(5);
    if luminance < 140.0 {
        "#ffffff"
    } else {
        "#111111"
    }
}

fn check_scores(name: &str, scores: &[Real]) -> Result<()> {
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite value in {name}")));
    }
    Ok(())
}

fn document(width: usize, height: usize, meta: Option<&Meta>, body: &str) -> String {
    let metadata = meta.map(Meta::metadata_element).unwrap_or_default();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">{metadata}\
         <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>{body}</svg>"
    )
}

fn title_text(title: &str, width: usize) -> String {
    format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" {FONT} \
         fill=\"#111111\">{}</text>",
        width / 2,
        esc(title)
    )
}

/// A visible placeholder plot for empty inputs.
#[must_use]
pub fn warning_svg(title: &str, message: &str) -> String {
    let body = format!(
        "{}<text x=\"210\" y=\"80\" text-anchor=\"middle\" font-size=\"14\" {FONT} \
         fill=\"#8a5a00\">warning: {}</text>",
        title_text(title, 420),
        esc(message)
    );
    document(420, 120, None, &body)
}

fn fmt_val(v: Real) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Grid heatmap on a diverging scale centered at zero: one row per
/// `row_labels` entry (top to bottom as given), one column per
/// `col_labels` entry, plus a color-scale legend.
///
/// # Errors
///
/// Returns [`Error::Shape`] if `values` is not `rows × cols` and
/// [`Error::Numeric`] for non-finite cells. Empty rows or columns yield
/// a warning plot.
pub fn heatmap_svg(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<Real>],
    meta: Option<&Meta>,
) -> Result<String> {
    if row_labels.is_empty() || col_labels.is_empty() {
        return Ok(warning_svg(title, "no data to plot"));
    }
    if values.len() != row_labels.len() {
        return Err(Error::shape(format!(
            "{} value rows for {} row labels",
            values.len(),
            row_labels.len()
        )));
    }
    let mut vmax: Real = 0.0;
    for row in values {
        if row.len() != col_labels.len() {
            return Err(Error::shape(format!(
                "value row of width {} under {} column labels",
                row.len(),
                col_labels.len()
            )));
        }
        check_scores("heatmap values", row)?;
        for v in row {
            vmax = vmax.max(v.abs());
        }
    }

    let (cell_w, cell_h) = (46usize, 30usize);
    let (left, top) = (86usize, 48usize);
    let grid_w = cell_w * col_labels.len();
    let grid_h = cell_h * row_labels.len();
    let legend_w = 96usize;
    let width = left + grid_w + legend_w + 24;
    let height = top + grid_h + 56;

    let mut body = title_text(title, width);
    for (r, label) in row_labels.iter().enumerate() {
        let y = top + r * cell_h;
        body += &format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"12\" {FONT} \
             fill=\"#111111\">{}</text>",
            left - 8,
            y + cell_h / 2 + 4,
            esc(label)
        );
        for (c, &v) in values[r].iter().enumerate() {
            let x = left + c * cell_w;
            let fill = diverging_color(v, vmax);
            body += &format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" \
                 fill=\"{fill}\" stroke=\"#d0d0d0\" stroke-width=\"1\"><title>{}: {}</title></rect>",
                esc(&format!("{} / {}", row_labels[r], col_labels[c])),
                fmt_val(v)
            );
            body += &format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\" {MONO} \
                 fill=\"{}\">{}</text>",
                x + cell_w / 2,
                y + cell_h / 2 + 3,
                text_color_on(&fill),
                fmt_val(v)
            );
        }
    }
    for (c, label) in col_labels.iter().enumerate() {
        body += &format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" {FONT} \
             fill=\"#111111\">{}</text>",
            left + c * cell_w + cell_w / 2,
            top + grid_h + 18,
            esc(label)
        );
    }

    // Color legend: vertical gradient sampled in 24 bands.
    let (lx, ly, lw, lh) = (left + grid_w + 28, top, 18usize, grid_h.max(60));
    let bands = 24usize;
    for b in 0..bands {
        let t = 1.0 - 2.0 * (b as Real + 0.5) / bands as Real; // +1 → −1 top→bottom
        let fill = diverging_color(t * vmax, vmax);
        let band_h = lh as Real / bands as Real;
        body += &format!(
            "<rect x=\"{lx}\" y=\"{:.2}\" width=\"{lw}\" height=\"{:.2}\" fill=\"{fill}\"/>",
            ly as Real + b as Real * band_h,
            band_h + 0.5
        );
    }
    body += &format!(
        "<rect x=\"{lx}\" y=\"{ly}\" width=\"{lw}\" height=\"{lh}\" fill=\"none\" \
         stroke=\"#808080\" stroke-width=\"1\"/>"
    );
    for (frac, v) in [(0.0, vmax), (0.5, 0.0), (1.0, -vmax)] {
        body += &format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"10\" {FONT} fill=\"#111111\">{}</text>",
            lx + lw + 6,
            ly as Real + frac * lh as Real + 4.0,
            fmt_val(v)
        );
    }
    Ok(document(width, height, meta, &body))
}

/// Token strip: each token drawn on a background tinted by its score
/// (diverging scale normalized to the strip's own max |score|), with
/// the highest-|score| token outlined and called out in a footer.
///
/// # Errors
///
/// Returns [`Error::Shape`] on a token/score length mismatch and
/// [`Error::Numeric`] for non-finite scores. Empty input yields a
/// warning plot.
pub fn token_strip_svg(
    title: &str,
    tokens: &[String],
    scores: &[Real],
    meta: Option<&Meta>,
) -> Result<String> {
    if tokens.is_empty() {
        return Ok(warning_svg(title, "no tokens to plot"));
    }
    if tokens.len() != scores.len() {
        return Err(Error::shape(format!(
            "{} tokens with {} scores",
            tokens.len(),
            scores.len()
        )));
    }
    check_scores("token scores", scores)?;
    let vmax = scores.iter().fold(0.0 as Real, |m, s| m.max(s.abs()));
    let max_idx = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map_or(0, |(i, _)| i);

    let char_w = 8.5;
    let (box_h, gap, line_h) = (24.0, 6.0, 34.0);
    let max_row_w = 860.0;
    let (left, top) = (20.0, 44.0);

    // Lay out first so the document height is known.
    let mut placements: Vec<(Real, Real, Real)> = Vec::with_capacity(tokens.len());
    let (mut x, mut y) = (left, top);
    for token in tokens {
        let w = char_w * token.chars().count() as Real + 12.0;
        if x + w > left + max_row_w && x > left {
            x = left;
            y += line_h;
        }
        placements.push((x, y, w));
        x += w + gap;
    }
    let width = 900usize;
    let height = (y + box_h + 52.0) as usize;

    let mut body = title_text(title, width);
    for (i, token) in tokens.iter().enumerate() {
        let (x, y, w) = placements[i];
        let fill = diverging_color(scores[i], vmax);
        let stroke = if i == max_idx {
            "stroke=\"#111111\" stroke-width=\"2.5\""
        } else {
            "stroke=\"#cccccc\" stroke-width=\"1\""
        };
        body += &format!(
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{box_h}\" rx=\"4\" \
             fill=\"{fill}\" {stroke}><title>{}: {}</title></rect>",
            esc(token),
            fmt_val(scores[i])
        );
        body += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" {MONO} \
             fill=\"{}\">{}</text>",
            x + w / 2.0,
            y + box_h - 7.0,
            text_color_on(&fill),
            esc(token)
        );
    }
    body += &format!(
        "<text x=\"{left}\" y=\"{:.1}\" font-size=\"12\" {FONT} fill=\"#111111\">max |score| \
         = {} on token &quot;{}&quot;</text>",
        y + box_h + 24.0,
        fmt_val(scores[max_idx]),
        esc(&tokens[max_idx])
    );
    Ok(document(width, height, meta, &body))
}

struct Frame {
    left: Real,
    top: Real,
    w: Real,
    h: Real,
}

impl Frame {
    fn x(&self, t: Real) -> Real {
        self.left + t * self.w
    }
    fn y(&self, t: Real) -> Real {
        self.top + (1.0 - t) * self.h
    }
    fn axes(&self, x_label: &str, y_label: &str) -> String {
        let mut s = format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
             stroke=\"#444444\" stroke-width=\"1\"/>",
            self.left, self.top, self.w, self.h
        );
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" {FONT} \
             fill=\"#111111\">{}</text>",
            self.left + self.w / 2.0,
            self.top + self.h + 34.0,
            esc(x_label)
        );
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\" {FONT} \
             fill=\"#111111\" transform=\"rotate(-90 {:.1} {:.1})\">{}</text>",
            self.left - 44.0,
            self.top + self.h / 2.0,
            self.left - 44.0,
            self.top + self.h / 2.0,
            esc(y_label)
        );
        s
    }
}

/// ROC curve with the chance diagonal and an AUROC readout.
///
/// `points` are (false-positive rate, true-positive rate) pairs in
/// `[0, 1]`, as produced by `eval::roc_points`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] for non-finite or out-of-range points.
/// An empty point list yields a warning plot.
pub fn roc_svg(
    title: &str,
    points: &[(Real, Real)],
    auroc: Real,
    meta: Option<&Meta>,
) -> Result<String> {
    if points.is_empty() {
        return Ok(warning_svg(title, "no roc points"));
    }
    for &(fpr, tpr) in points {
        if !(0.0..=1.0).contains(&fpr) || !(0.0..=1.0).contains(&tpr) {
            return Err(Error::numeric(format!(
                "roc point ({fpr}, {tpr}) outside the unit square"
            )));
        }
    }
    if !auroc.is_finite() {
        return Err(Error::numeric("non-finite auroc"));
    }
    let frame = Frame {
        left: 70.0,
        top: 44.0,
        w: 340.0,
        h: 340.0,
    };
    let (width, height) = (460usize, 450usize);
    let mut body = title_text(title, width);
    body += &frame.axes("false positive rate", "true positive rate");
    body += &format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999999\" \
         stroke-dasharray=\"5 4\" stroke-width=\"1\"/>",
        frame.x(0.0),
        frame.y(0.0),
        frame.x(1.0),
        frame.y(1.0)
    );
    let path: Vec<String> = points
        .iter()
        .map(|&(fpr, tpr)| format!("{:.2},{:.2}", frame.x(fpr), frame.y(tpr)))
        .collect();
    body += &format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        path.join(" "),
        PALETTE[0]
    );
    for t in [0.0, 0.5, 1.0] {
        body += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\" {FONT} \
             fill=\"#111111\">{t}</text>",
            frame.x(t),
            frame.y(0.0) + 16.0
        );
        body += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\" {FONT} \
             fill=\"#111111\">{t}</text>",
            frame.x(0.0) - 6.0,
            frame.y(t) + 4.0
        );
    }
    body += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" {FONT} fill=\"#111111\">AUROC = \
         {auroc:.4}</text>",
        frame.x(0.42),
        frame.y(0.08)
    );
    Ok(document(width, height, meta, &body))
}

/// Overlaid histograms of up to four score groups on shared bins.
///
/// # Errors
///
/// Returns [`Error::Config`] for zero bins or more groups than the
/// palette, and [`Error::Numeric`] for non-finite scores. Groups with no
/// values at all yield a warning plot.
pub fn histogram_svg(
    title: &str,
    groups: &[(String, Vec<Real>)],
    n_bins: usize,
    meta: Option<&Meta>,
) -> Result<String> {
    if groups.iter().all(|(_, v)| v.is_empty()) {
        return Ok(warning_svg(title, "no scores to plot"));
    }
    if n_bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if groups.len() > PALETTE.len() {
        return Err(Error::config(format!(
            "at most {} histogram groups supported",
            PALETTE.len()
        )));
    }
    let mut lo = Real::INFINITY;
    let mut hi = Real::NEG_INFINITY;
    for (name, values) in groups {
        check_scores(&format!("histogram group {name}"), values)?;
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let bin_w = (hi - lo) / n_bins as Real;
    let counts: Vec<Vec<usize>> = groups
        .iter()
        .map(|(_, values)| {
            let mut c = vec![0usize; n_bins];
            for &v in values {
                let b = (((v - lo) / bin_w) as usize).min(n_bins - 1);
                c[b] += 1;
            }
            c
        })
        .collect();
    let peak = counts
        .iter()
        .flat_map(|c| c.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1) as Real;

    let frame = Frame {
        left: 70.0,
        top: 44.0,
        w: 440.0,
        h: 280.0,
    };
    let (width, height) = (560usize, 390usize);
    let mut body = title_text(title, width);
    body += &frame.axes("score", "count");
    let slot = frame.w / n_bins as Real;
    let bar_w = slot / groups.len() as Real;
    for (g, count) in counts.iter().enumerate() {
        for (b, &c) in count.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let h = frame.h * c as Real / peak;
            body += &format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" \
                 fill-opacity=\"0.75\"><title>{}: [{}, {}) count {c}</title></rect>",
                frame.left + b as Real * slot + g as Real * bar_w,
                frame.top + frame.h - h,
                (bar_w - 1.0).max(1.0),
                h,
                PALETTE[g],
                esc(&groups[g].0),
                fmt_val(lo + b as Real * bin_w),
                fmt_val(lo + (b as Real + 1.0) * bin_w),
            );
        }
    }
    for (g, (name, _)) in groups.iter().enumerate() {
        let y = frame.top + 14.0 + 18.0 * g as Real;
        body += &format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\" \
             fill-opacity=\"0.75\"/>",
            frame.left + frame.w - 130.0,
            y - 10.0,
            PALETTE[g]
        );
        body += &format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"12\" {FONT} fill=\"#111111\">{}</text>",
            frame.left + frame.w - 112.0,
            esc(name)
        );
    }
    for (t, v) in [(0.0, lo), (0.5, (lo + hi) / 2.0), (1.0, hi)] {
        body += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\" {FONT} \
             fill=\"#111111\">{}</text>",
            frame.x(t),
            frame.y(0.0) + 16.0,
            fmt_val(v)
        );
    }
    body += &format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\" {FONT} \
         fill=\"#111111\">{}</text>",
        frame.x(0.0) - 6.0,
        frame.y(1.0) + 4.0,
        peak as usize
    );
    Ok(document(width, height, meta, &body))
}

/// Line plot of `(x, mean, std)` points with ±1 std error bars, for
/// sweep summaries.
///
/// # Errors
///
/// Returns [`Error::Numeric`] for non-finite coordinates. An empty
/// series yields a warning plot.
pub fn line_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(Real, Real, Real)],
    meta: Option<&Meta>,
) -> Result<String> {
    if series.is_empty() {
        return Ok(warning_svg(title, "no points to plot"));
    }
    for &(x, mean, std) in series {
        if !x.is_finite() || !mean.is_finite() || !std.is_finite() {
            return Err(Error::numeric("non-finite sweep point"));
        }
    }
    let (mut x_lo, mut x_hi) = (Real::INFINITY, Real::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (Real::INFINITY, Real::NEG_INFINITY);
    for &(x, mean, std) in series {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(mean - std);
        y_hi = y_hi.max(mean + std);
    }
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.06 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let frame = Frame {
        left: 76.0,
        top: 44.0,
        w: 420.0,
        h: 280.0,
    };
    let (width, height) = (550usize, 390usize);
    let tx = |x: Real| frame.x((x - x_lo) / (x_hi - x_lo));
    let ty = |y: Real| frame.y((y - y_lo) / (y_hi - y_lo));

    let mut body = title_text(title, width);
    body += &frame.axes(x_label, y_label);
    let mut path = Vec::with_capacity(series.len());
    for &(x, mean, std) in series {
        let (cx, cy) = (tx(x), ty(mean));
        path.push(format!("{cx:.2},{cy:.2}"));
        if std > 0.0 {
            let (y1, y2) = (ty(mean - std), ty(mean + std));
            body += &format!(
                "<line x1=\"{cx:.2}\" y1=\"{y1:.2}\" x2=\"{cx:.2}\" y2=\"{y2:.2}\" \
                 stroke=\"#555555\" stroke-width=\"1.5\" class=\"errbar\"/>"
            );
            for yy in [y1, y2] {
                body += &format!(
                    "<line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" \
                     stroke=\"#555555\" stroke-width=\"1.5\"/>",
                    cx - 5.0,
                    cx + 5.0
                );
            }
        }
    }
    body += &format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        path.join(" "),
        PALETTE[0]
    );
    for &(x, mean, _) in series {
        body += &format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"><title>{} → {}</title>\
             </circle>",
            tx(x),
            ty(mean),
            PALETTE[0],
            fmt_val(x),
            fmt_val(mean)
        );
    }
    for (v, anchor_x) in [(x_lo, frame.x(0.0)), (x_hi, frame.x(1.0))] {
        body += &format!(
            "<text x=\"{anchor_x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"10\" \
             {FONT} fill=\"#111111\">{}</text>",
            frame.y(0.0) + 16.0,
            fmt_val(v)
        );
    }
    for (v, anchor_y) in [(y_lo, frame.y(0.0)), (y_hi, frame.y(1.0))] {
        body += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"10\" {FONT} \
             fill=\"#111111\">{}</text>",
            frame.x(0.0) - 6.0,
            anchor_y + 4.0,
            fmt_val(v)
        );
    }
    Ok(document(width, height, meta, &body))
}

/// Vertical bar chart with a zero baseline; bars extend up or down.
///
/// # Errors
///
/// Returns [`Error::Shape`] on a label/value length mismatch and
/// [`Error::Numeric`] for non-finite values. Empty input yields a
/// warning plot.
pub fn bar_svg(
    title: &str,
    labels: &[String],
    values: &[Real],
    meta: Option<&Meta>,
) -> Result<String> {
    if labels.is_empty() {
        return Ok(warning_svg(title, "no bars to plot"));
    }
    if labels.len() != values.len() {
        return Err(Error::shape(format!(
            "{} labels with {} values",
            labels.len(),
            values.len()
        )));
    }
    check_scores("bar values", values)?;
    let y_lo = values.iter().fold(0.0 as Real, |m, &v| m.min(v));
    let mut y_hi = values.iter().fold(0.0 as Real, |m, &v| m.max(v));
    if y_lo == y_hi {
        y_hi = y_lo + 1.0;
    }

    let frame = Frame {
        left: 76.0,
        top: 44.0,
        w: (labels.len() as Real * 72.0).max(240.0),
        h: 260.0,
    };
    let width = (frame.left + frame.w + 30.0) as usize;
    let height = 392usize;
    let ty = |y: Real| frame.y((y - y_lo) / (y_hi - y_lo));
    let slot = frame.w / labels.len() as Real;
    let bar_w = slot * 0.62;

    let mut body = title_text(title, width);
    body += &frame.axes("", "value");
    let base = ty(0.0);
    body += &format!(
        "<line x1=\"{:.1}\" y1=\"{base:.2}\" x2=\"{:.1}\" y2=\"{base:.2}\" stroke=\"#444444\" \
         stroke-width=\"1\"/>",
        frame.left,
        frame.left + frame.w
    );
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let x = frame.left + i as Real * slot + (slot - bar_w) / 2.0;
        let yv = ty(v);
        let (y, h) = if v >= 0.0 {
            (yv, base - yv)
        } else {
            (base, yv - base)
        };
        body += &format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{:.2}\" \
             fill=\"{}\"><title>{}: {}</title></rect>",
            h.max(0.5),
            PALETTE[usize::from(v < 0.0)],
            esc(label),
            fmt_val(v)
        );
        body += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\" {FONT} \
             fill=\"#111111\">{}</text>",
            x + bar_w / 2.0,
            if v >= 0.0 { yv - 6.0 } else { yv + 14.0 },
            fmt_val(v)
        );
        body += &format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\" {FONT} \
             fill=\"#111111\">{}</text>",
            x + bar_w / 2.0,
            frame.top + frame.h + 18.0,
            esc(label)
        );
    }
    Ok(document(width, height, meta, &body))
}

/// Minimal XML well-formedness check for generated SVG: exactly one
/// root element and it is `<svg>`, every open tag closed in order,
/// quoted attributes, clean entities, nothing but whitespace outside
/// the root.
///
/// # Errors
///
/// Returns [`Error::Format`] describing the first violation.
pub fn check_svg(svg: &str) -> Result<()> {
    let bytes = svg.as_bytes();
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0usize;
    let mut i = 0usize;
    let fail = |msg: String| Err(Error::Format(format!("svg check: {msg}")));

    while i < bytes.len() {
        if bytes[i] != b'<' {
            // Text content: no stray '<' by construction; validate '&' and
            // reject text outside the root.
            let start = i;
            while i < bytes.len() && bytes[i] != b'<' {
                i += 1;
            }
            let text = &svg[start..i];
            if stack.is_empty() && !text.trim().is_empty() {
                return fail(format!("text outside root element: {text:?}"));
            }
            for (j, c) in text.char_indices() {
                if c == '&' {
                    let rest = &text[j + 1..];
                    let semi = rest.find(';').unwrap_or(rest.len().min(12));
                    let entity = &rest[..semi];
                    if !rest.contains(';')
                        || entity.is_empty()
                        || !entity
                            .chars()
                            .all(|c| c.is_ascii_alphanumeric() || c == '#')
                    {
                        return fail(format!("bad entity near {:?}", &text[j..]));
                    }
                }
            }
            continue;
        }
        // A tag, comment, or declaration.
        if svg[i..].starts_with("<!--") {
            match svg[i..].find("-->") {
                Some(end) => i += end + 3,
                None => return fail("unterminated comment".to_string()),
            }
            continue;
        }
        if svg[i..].starts_with("<?") {
            match svg[i..].find("?>") {
                Some(end) => i += end + 2,
                None => return fail("unterminated declaration".to_string()),
            }
            continue;
        }
        // Scan to the matching '>', honoring quotes.
        let start = i;
        i += 1;
        let mut quote: Option<u8> = None;
        while i < bytes.len() {
            match (quote, bytes[i]) {
                (Some(q), c) if c == q => quote = None,
                (None, b'"' | b'\'') => quote = Some(bytes[i]),
                (None, b'>') => break,
                (None, b'<') => return fail("'<' inside a tag".to_string()),
                _ => {}
            }
            i += 1;
        }
        if i >= bytes.len() {
            return fail("unterminated tag".to_string());
        }
        let tag = &svg[start + 1..i];
        i += 1;
        if let Some(name) = tag.strip_prefix('/') {
            let name = name.trim();
            match stack.pop() {
                Some(open) if open == name => {}
                Some(open) => return fail(format!("</{name}> closes <{open}>")),
                None => return fail(format!("</{name}> with nothing open")),
            }
            continue;
        }
        let self_closing = tag.ends_with('/');
        let body = tag.strip_suffix('/').unwrap_or(tag);
        let name = body
            .split_whitespace()
            .next()
            .ok_or_else(|| Error::Format("svg check: empty tag".to_string()))?;
        if !body.matches('"').count().is_multiple_of(2) {
            return fail(format!("unbalanced quotes in <{name}>"));
        }
        if stack.is_empty() {
            roots += 1;
            if roots > 1 {
                return fail("more than one root element".to_string());
            }
            if name != "svg" {
                return fail(format!("root element is <{name}>, not <svg>"));
            }
        }
        if !self_closing {
            stack.push(name.to_string());
        }
    }
    if let Some(open) = stack.pop() {
        return fail(format!("<{open}> never closed"));
    }
    if roots == 0 {
        return fail("no root element".to_string());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn all_zero_heatmap_is_a_uniform_mid_color_grid() {
        let svg = heatmap_svg(
            "zeros",
            &labels(&["L1", "L0"]),
            &labels(&["h0", "h1", "mlp"]),
            &[vec![0.0; 3], vec![0.0; 3]],
            None,
        )
        .unwrap();
        check_svg(&svg).unwrap();
        // Six cells, all white; the legend bands are white too.
        assert!(svg.matches("fill=\"#ffffff\"").count() >= 6);
        assert!(!svg.contains(NEG_HEX));
        assert!(!svg.contains(POS_HEX));
    }

    const POS_HEX: &str = "#b2182b";
    const NEG_HEX: &str = "#2166ac";

    #[test]
    fn single_nonzero_cell_is_the_only_saturated_cell() {
        let values = vec![vec![0.0, 0.0, 0.0], vec![0.0, 2.5, 0.0]];
        let svg = heatmap_svg(
            "one cell",
            &labels(&["L1", "L0"]),
            &labels(&["h0", "h1", "mlp"]),
            &values,
            None,
        )
        .unwrap();
        check_svg(&svg).unwrap();
        // The saturated positive endpoint colors exactly the hot cell
        // (legend bands sample strictly inside the scale).
        assert_eq!(svg.matches(POS_HEX).count(), 1, "one saturated cell");
        assert!(!svg.contains(NEG_HEX));
        // The legend's top label is the scale maximum.
        assert!(svg.contains(">2.500</text>"));
    }

    #[test]
    fn heatmap_guards_shapes_nan_and_emptiness() {
        let rows = labels(&["L0"]);
        let cols = labels(&["h0"]);
        assert!(heatmap_svg("t", &rows, &cols, &[vec![Real::NAN]], None).is_err());
        assert!(heatmap_svg("t", &rows, &cols, &[vec![1.0, 2.0]], None).is_err());
        assert!(heatmap_svg("t", &rows, &cols, &[], None).is_err());
        let empty = heatmap_svg("t", &[], &cols, &[], None).unwrap();
        check_svg(&empty).unwrap();
        assert!(empty.contains("warning: no data to plot"));
    }

    #[test]
    fn heatmap_embeds_metadata_when_given() {
        let meta = Meta::new("patch", Some(3), &serde_json::json!({"samples": 200})).unwrap();
        let svg = heatmap_svg(
            "with meta",
            &labels(&["L0"]),
            &labels(&["h0"]),
            &[vec![1.0]],
            Some(&meta),
        )
        .unwrap();
        check_svg(&svg).unwrap();
        assert!(svg.contains("<metadata>"));
        assert!(svg.contains("&quot;samples&quot;:200"));
    }

    #[test]
    fn token_strip_annotates_the_max_score_token() {
        let tokens = labels(&["the", "film", "was", "wonderful", "Marcus"]);
        let scores = [0.02, -0.1, 0.0, 0.15, -0.85];
        let svg = token_strip_svg("strip", &tokens, &scores, None).unwrap();
        check_svg(&svg).unwrap();
        assert!(svg.contains("max |score| = -0.850 on token &quot;Marcus&quot;"));
        assert_eq!(svg.matches("stroke-width=\"2.5\"").count(), 1);
        // Escaping keeps hostile tokens inert.
        let weird = labels(&["<script>", "a&b"]);
        let svg = token_strip_svg("esc", &weird, &[1.0, 0.5], None).unwrap();
        check_svg(&svg).unwrap();
        assert!(svg.contains("&lt;script&gt;"));

        assert!(token_strip_svg("t", &tokens, &[1.0], None).is_err());
        assert!(token_strip_svg("t", &tokens, &[Real::INFINITY; 5], None).is_err());
        let empty = token_strip_svg("t", &[], &[], None).unwrap();
        assert!(empty.contains("warning"));
    }

    #[test]
    fn long_token_strips_wrap_onto_new_lines() {
        let tokens: Vec<String> = (0..60).map(|i| format!("token{i:02}")).collect();
        let scores: Vec<Real> = (0..60).map(|i| i as Real / 60.0).collect();
        let svg = token_strip_svg("wrap", &tokens, &scores, None).unwrap();
        check_svg(&svg).unwrap();
        let first_y = svg.find("y=\"44.0\"");
        let wrapped_y = svg.find("y=\"78.0\"");
        assert!(first_y.is_some() && wrapped_y.is_some(), "expected two rows");
    }

    #[test]
    fn roc_histogram_line_and_bar_render_well_formed_svg() {
        let roc = roc_svg(
            "roc",
            &[(0.0, 0.0), (0.1, 0.7), (0.4, 0.9), (1.0, 1.0)],
            0.91,
            None,
        )
        .unwrap();
        check_svg(&roc).unwrap();
        assert!(roc.contains("AUROC = 0.9100"));
        assert!(roc_svg("bad", &[(1.2, 0.0)], 0.5, None).is_err());

        let hist = histogram_svg(
            "hist",
            &[
                ("shortcut".to_string(), vec![2.0, 2.2, 2.4, 3.0]),
                ("random".to_string(), vec![0.1, 0.2, 0.3, 0.4]),
            ],
            8,
            None,
        )
        .unwrap();
        check_svg(&hist).unwrap();
        assert!(hist.contains("shortcut") && hist.contains("random"));
        assert!(histogram_svg("h", &[("a".into(), vec![1.0])], 0, None).is_err());

        let line = line_svg(
            "sweep",
            "shortcut_freq",
            "acac",
            &[(0.0, 1.0, 0.5), (0.001, 12.0, 2.0), (0.01, 33.0, 1.5)],
            None,
        )
        .unwrap();
        check_svg(&line).unwrap();
        assert_eq!(line.matches("class=\"errbar\"").count(), 3);

        let bar = bar_svg(
            "bars",
            &labels(&["before", "after"]),
            &[33.1, -2.5],
            None,
        )
        .unwrap();
        check_svg(&bar).unwrap();
        assert!(bar.contains("33.1"));
    }

    #[test]
    fn checker_rejects_malformed_documents() {
        assert!(check_svg("<svg><rect></svg>").is_err()); // unclosed rect
        assert!(check_svg("<svg/><svg/>").is_err()); // two roots
        assert!(check_svg("<div><p/></div>").is_err()); // root not svg
        assert!(check_svg("<svg><a></b></svg>").is_err()); // mismatched
        assert!(check_svg("<svg>&nope</svg>").is_err()); // bad entity
        assert!(check_svg("<svg x=\"1></svg>").is_err()); // unbalanced quote
        assert!(check_svg("hello<svg/>").is_err()); // text outside root
        assert!(check_svg("<svg><rect/></svg>").is_ok());
        assert!(check_svg("<!-- note --><svg><g><rect x=\"1\"/></g></svg>").is_ok());
    }

    #[test]
    fn diverging_scale_endpoints_and_midpoint() {
        assert_eq!(diverging_color(0.0, 1.0), "#ffffff");
        assert_eq!(diverging_color(5.0, 0.0), "#ffffff");
        assert_eq!(diverging_color(1.0, 1.0), POS_HEX);
        assert_eq!(diverging_color(-1.0, 1.0), NEG_HEX);
        // Clamped beyond the scale.
        assert_eq!(diverging_color(9.0, 1.0), POS_HEX);
        assert!(text_color_on(NEG_HEX) == "#ffffff");
        assert!(text_color_on("#ffffff") == "#111111");
    }
}
