use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::writer::Condition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityRow {
    pub premise: String,
    pub condition: Condition,
    /// 1-based.
    pub paragraph_index: usize,
    pub score: f64,
    pub set_size: usize,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no rows")]
    Empty,
    #[error("duplicate row for {premise} / {condition} / paragraph {index}")]
    Duplicate {
        premise: String,
        condition: Condition,
        index: usize,
    },
    #[error("{premise} / {condition}: paragraph indices are not 1..={expected}")]
    Gaps {
        premise: String,
        condition: Condition,
        expected: usize,
    },
    #[error("{premise}: guided has {guided} paragraphs, unguided has {unguided}")]
    MismatchedCounts {
        premise: String,
        guided: usize,
        unguided: usize,
    },
    #[error("non-finite score for {premise} / {condition} / paragraph {index}")]
    NonFinite {
        premise: String,
        condition: Condition,
        index: usize,
    },
    #[error("cannot write report: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Rows in insertion order; premises keep the order they first appear in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub rows: Vec<HomogeneityRow>,
}

impl HomogeneityReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one row per score; `scores[0]` is paragraph 1.
    pub fn push_scores(&mut self, premise: &str, condition: Condition, scores: &[f64], set_size: usize) {
        for (i, &score) in scores.iter().enumerate() {
            self.rows.push(HomogeneityRow {
                premise: premise.to_string(),
                condition,
                paragraph_index: i + 1,
                score,
                set_size,
            });
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn premises(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.premise.as_str()) {
                out.push(&r.premise);
            }
        }
        out
    }

    /// Scores for one premise and condition, ordered by paragraph index.
    pub fn series(&self, premise: &str, condition: Condition) -> Vec<(usize, f64)> {
        let mut s: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.premise == premise && r.condition == condition)
            .map(|r| (r.paragraph_index, r.score))
            .collect();
        s.sort_by_key(|p| p.0);
        s
    }

    pub fn mean(&self, premise: &str, condition: Condition) -> Option<f64> {
        let s = self.series(premise, condition);
        (!s.is_empty()).then(|| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64)
    }

    /// Checks row uniqueness, finite scores, contiguous indices and equal
    /// paragraph counts across the two conditions of a premise.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::Empty);
        }
        let mut seen: BTreeMap<(&str, Condition), Vec<usize>> = BTreeMap::new();
        for r in &self.rows {
            if !r.score.is_finite() {
                return Err(ReportError::NonFinite {
                    premise: r.premise.clone(),
                    condition: r.condition,
                    index: r.paragraph_index,
                });
            }
            let idx = seen.entry((&r.premise, r.condition)).or_default();
            if idx.contains(&r.paragraph_index) {
                return Err(ReportError::Duplicate {
                    premise: r.premise.clone(),
                    condition: r.condition,
                    index: r.paragraph_index,
                });
            }
            idx.push(r.paragraph_index);
        }
        for ((premise, condition), idx) in &mut seen {
            idx.sort_unstable();
            if idx.iter().enumerate().any(|(i, &p)| p != i + 1) {
                return Err(ReportError::Gaps {
                    premise: premise.to_string(),
                    condition: *condition,
                    expected: idx.len(),
                });
            }
        }
        for premise in self.premises() {
            let g = seen.get(&(premise, Condition::Guided)).map(Vec::len);
            let u = seen.get(&(premise, Condition::Unguided)).map(Vec::len);
            if let (Some(guided), Some(unguided)) = (g, u) {
                if guided != unguided {
                    return Err(ReportError::MismatchedCounts {
                        premise: premise.to_string(),
                        guided,
                        unguided,
                    });
                }
            }
        }
        Ok(())
    }
}

/// CSV with columns premise,condition,paragraph_index,score,set_size.
pub fn emit_report(report: &HomogeneityReport, path: &Path) -> Result<(), ReportError> {
    report.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)?;
    Ok(())
}

const GUIDED_COLOR: &str = "#1f5fbf";
const UNGUIDED_COLOR: &str = "#c8312b";
const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const COLUMNS: usize = 3;
const MARGIN_L: f64 = 44.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 34.0;
const LEGEND_H: f64 = 28.0;

fn escape(s: &str) -> String {
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

/// Shared y range across panels, snapped outward to tenths.
fn y_range(report: &HomogeneityReport) -> (f64, f64) {
    let lo = report.rows.iter().map(|r| r.score).fold(f64::INFINITY, f64::min);
    let hi = report.rows.iter().map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
    let mut lo = (lo * 10.0).floor() / 10.0;
    let mut hi = (hi * 10.0).ceil() / 10.0;
    if hi - lo < 0.1 {
        hi = (lo + 0.1).min(1.0);
        lo = hi - 0.1;
    }
    (lo, hi)
}

/// SVG line chart: one panel per premise, guided in blue, unguided in red.
pub fn render_chart(report: &HomogeneityReport) -> Result<String, ReportError> {
    report.validate()?;
    let premises = report.premises();
    let cols = premises.len().min(COLUMNS);
    let rows = premises.len().div_ceil(COLUMNS);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + LEGEND_H;
    let (y_lo, y_hi) = y_range(report);
    let max_index = report.rows.iter().map(|r| r.paragraph_index).max().unwrap_or(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g class="legend" transform="translate(12,18)"><line x1="0" y1="-4" x2="18" y2="-4" stroke="{GUIDED_COLOR}" stroke-width="2"/><text x="22" y="0">guided</text><line x1="80" y1="-4" x2="98" y2="-4" stroke="{UNGUIDED_COLOR}" stroke-width="2"/><text x="102" y="0">unguided</text></g>"#
    );
    for (p, premise) in premises.iter().enumerate() {
        let ox = (p % COLUMNS) as f64 * PANEL_W;
        let oy = LEGEND_H + (p / COLUMNS) as f64 * PANEL_H;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let x_of = |i: usize| {
            if max_index <= 1 {
                MARGIN_L + plot_w / 2.0
            } else {
                MARGIN_L + plot_w * (i - 1) as f64 / (max_index - 1) as f64
            }
        };
        let y_of = |v: f64| MARGIN_T + plot_h * (y_hi - v) / (y_hi - y_lo);

        let _ = writeln!(s, r#"<g class="panel" transform="translate({ox},{oy})">"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            PANEL_W / 2.0,
            escape(premise)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#888"/>"##
        );
        for k in 0..=2 {
            let v = y_lo + (y_hi - y_lo) * k as f64 / 2.0;
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
                MARGIN_L - 4.0,
                y + 4.0
            );
        }
        for i in 1..=max_index {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{i}</text>"#,
                x_of(i),
                PANEL_H - MARGIN_B + 14.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">paragraph</text>"#,
            MARGIN_L + plot_w / 2.0,
            PANEL_H - 6.0
        );
        for (condition, color) in [(Condition::Guided, GUIDED_COLOR), (Condition::Unguided, UNGUIDED_COLOR)] {
            let series = report.series(premise, condition);
            if series.is_empty() {
                continue;
            }
            let points: Vec<String> = series
                .iter()
                .map(|&(i, v)| format!("{:.1},{:.1}", x_of(i), y_of(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{condition}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points.join(" ")
            );
            for &(i, v) in &series {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"><title>{condition} {i}: {v:.4}</title></circle>"#,
                    x_of(i),
                    y_of(v)
                );
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_chart(report: &HomogeneityReport, path: &Path) -> Result<(), ReportError> {
    let svg = render_chart(report)?;
    write_atomic(path, svg.as_bytes())?;
    Ok(())
}
