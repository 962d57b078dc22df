//! Histogram series, summaries and their exports.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::scoring::{predicate_of, to_percent, AggregateResult, Mode, NodeScore};

/// Domain achievements closer than this are treated as tied.
pub const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Domains,
    Controls,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "domains" => Ok(Self::Domains),
            "controls" => Ok(Self::Controls),
            other => Err(format!("unknown level `{other}` (expected domains|controls)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub node_id: String,
    pub label: String,
    pub achievement: f64,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSeries {
    pub level: Level,
    /// Maximum of the grading scale; every bar's pair sums to this.
    pub max_scale: f64,
    pub bars: Vec<Bar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub framework_id: String,
    pub overall_achievement: f64,
    pub overall_percent: f64,
    pub predicate: String,
    pub strongest_domains: Vec<String>,
    pub weakest_domains: Vec<String>,
    pub advice: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("reports need a complete strict-mode result (mode {mode:?}, {answered} of {total} leaves answered)")]
    Incomplete {
        mode: Mode,
        answered: usize,
        total: usize,
    },
    #[error("framework has no domains")]
    NoDomains,
}

fn require_strict(result: &AggregateResult) -> Result<(), ReportError> {
    if result.mode != Mode::Strict || !result.is_complete() || result.overall().is_none() {
        return Err(ReportError::Incomplete {
            mode: result.mode,
            answered: result.answered_count,
            total: result.total_leaves,
        });
    }
    Ok(())
}

fn score(node: &NodeScore) -> (f64, f64) {
    (
        node.achievement.expect("strict results score every node"),
        node.priority.expect("strict results score every node"),
    )
}

/// Achievement/priority bars for every domain or every control, in
/// framework pre-order. Values are copied unrounded.
pub fn histogram(result: &AggregateResult, level: Level) -> Result<HistogramSeries, ReportError> {
    require_strict(result)?;
    let nodes: Vec<&NodeScore> = match level {
        Level::Domains => result.domains().iter().collect(),
        Level::Controls => result
            .domains()
            .iter()
            .flat_map(NodeScore::iter)
            .filter(|n| n.bears_leaves())
            .collect(),
    };
    let bars = nodes
        .into_iter()
        .map(|n| {
            let (achievement, priority) = score(n);
            Bar {
                node_id: n.node_id.clone(),
                label: n.name.clone(),
                achievement,
                priority,
            }
        })
        .collect();
    Ok(HistogramSeries {
        level,
        max_scale: result.scale.max_f64(),
        bars,
    })
}

pub fn summarize(result: &AggregateResult) -> Result<SummaryReport, ReportError> {
    require_strict(result)?;
    let domains = result.domains();
    if domains.is_empty() {
        return Err(ReportError::NoDomains);
    }
    let overall = result.overall().expect("checked by require_strict");
    let scores: Vec<(&NodeScore, f64, f64)> = domains
        .iter()
        .map(|d| {
            let (a, p) = score(d);
            (d, a, p)
        })
        .collect();
    let best = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let worst = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let strongest: Vec<_> = scores
        .iter()
        .filter(|s| best - s.1 <= TIE_EPSILON)
        .collect();
    let weakest: Vec<_> = scores
        .iter()
        .filter(|s| s.1 - worst <= TIE_EPSILON)
        .collect();

    let strong_names: Vec<&str> = strongest.iter().map(|s| s.0.name.as_str()).collect();
    let weak_parts: Vec<String> = weakest
        .iter()
        .map(|s| {
            let (_, p) = display_pair(s.1, result.scale.max_f64());
            format!("{} (priority {})", s.0.name, p)
        })
        .collect();
    let advice = format!(
        "Strongest area(s): {}. Improvement priority: {}.",
        strong_names.join(", "),
        weak_parts.join(", ")
    );

    Ok(SummaryReport {
        framework_id: result.framework_id.clone(),
        overall_achievement: overall,
        overall_percent: to_percent(overall, &result.scale).expect("aggregate stays in range"),
        predicate: predicate_of(overall, &result.scale)
            .expect("aggregate stays in range")
            .to_owned(),
        strongest_domains: strongest.iter().map(|s| s.0.node_id.clone()).collect(),
        weakest_domains: weakest.iter().map(|s| s.0.node_id.clone()).collect(),
        advice,
    })
}

/// Round half up to 2 decimals. The small bias absorbs binary
/// representation error on inputs like 2.675.
pub fn round2(value: f64) -> f64 {
    ((value * 100.0) + 0.5 + 1e-7).floor() / 100.0
}

pub fn fmt2(value: f64) -> String {
    format!("{:.2}", round2(value))
}

/// Display strings for an (achievement, priority) pair. Priority is derived
/// from the rounded achievement so the displayed pair always sums to max.
pub fn display_pair(achievement: f64, max: f64) -> (String, String) {
    let a = round2(achievement);
    (format!("{a:.2}"), format!("{:.2}", (max - a).max(0.0)))
}

/// Percent for display: at most 2 decimals, trailing zeros dropped.
pub fn fmt_percent(percent: f64) -> String {
    let s = fmt2(percent);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Json,
    Csv,
    TextTable,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "text-table" | "text" => Ok(Self::TextTable),
            other => Err(format!(
                "unknown format `{other}` (expected json|csv|text-table)"
            )),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Json => "json",
            Self::Csv => "csv",
            Self::TextTable => "text-table",
        })
    }
}

/// Deterministic document rendering. JSON keeps full canonical precision;
/// CSV and text tables carry 2-decimal display values.
pub trait Export {
    fn export(&self, format: ExportFormat) -> String;
}

impl Export for HistogramSeries {
    fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => json_doc(self),
            ExportFormat::Csv => {
                let rows = self.bars.iter().map(|b| {
                    let (a, p) = display_pair(b.achievement, self.max_scale);
                    vec![b.node_id.clone(), b.label.clone(), a, p]
                });
                csv_doc(&["node_id", "label", "achievement", "priority"], rows)
            }
            ExportFormat::TextTable => {
                let rows = self.bars.iter().map(|b| {
                    let (a, p) = display_pair(b.achievement, self.max_scale);
                    vec![b.node_id.clone(), b.label.clone(), a, p]
                });
                text_table(&["node_id", "label", "achievement", "priority"], rows)
            }
        }
    }
}

impl Export for AggregateResult {
    fn export(&self, format: ExportFormat) -> String {
        let max = self.scale.max_f64();
        let rows = || {
            self.root.iter().map(move |n| {
                let (a, p) = match n.achievement {
                    Some(a) => display_pair(a, max),
                    None => (String::new(), String::new()),
                };
                vec![n.node_id.clone(), n.name.clone(), a, p, fmt2(n.coverage)]
            })
        };
        let header = ["node_id", "label", "achievement", "priority", "coverage"];
        match format {
            ExportFormat::Json => json_doc(self),
            ExportFormat::Csv => csv_doc(&header, rows()),
            ExportFormat::TextTable => text_table(&header, rows()),
        }
    }
}

impl Export for SummaryReport {
    fn export(&self, format: ExportFormat) -> String {
        let rows = || {
            [
                ("framework_id", self.framework_id.clone()),
                ("overall_achievement", fmt2(self.overall_achievement)),
                ("overall_percent", fmt2(self.overall_percent)),
                ("predicate", self.predicate.clone()),
                ("strongest_domains", self.strongest_domains.join(" ")),
                ("weakest_domains", self.weakest_domains.join(" ")),
                ("advice", self.advice.clone()),
            ]
            .into_iter()
            .map(|(k, v)| vec![k.to_owned(), v])
        };
        match format {
            ExportFormat::Json => json_doc(self),
            ExportFormat::Csv => csv_doc(&["field", "value"], rows()),
            ExportFormat::TextTable => text_table(&["field", "value"], rows()),
        }
    }
}

fn json_doc<T: Serialize>(value: &T) -> String {
    let mut s = canonical::to_string_pretty(value);
    s.push('\n');
    s
}

fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn csv_doc<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn ascii(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii() && !c.is_ascii_control() { c } else { '?' })
        .collect()
}

fn text_table<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|r| r.iter().map(|f| ascii(f)).collect())
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, f) in widths.iter_mut().zip(row) {
            *w = (*w).max(f.len());
        }
    }
    let mut out = String::new();
    let mut line = |fields: &[&str]| {
        let cells: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    };
    line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// One line per bar: `#` per 0.1 achievement, `-` per 0.1 priority.
pub fn text_bars(series: &HistogramSeries) -> String {
    let width = series.bars.iter().map(|b| b.node_id.len()).max().unwrap_or(0);
    let mut out = String::new();
    for bar in &series.bars {
        let (a, p) = display_pair(bar.achievement, series.max_scale);
        let filled = (bar.achievement * 10.0 + 0.5 + 1e-7).floor() as usize;
        let total = (series.max_scale * 10.0).round() as usize;
        let empty = total.saturating_sub(filled);
        let _ = writeln!(
            out,
            "{:<width$} |{}{}| {} (priority {})",
            bar.node_id,
            "#".repeat(filled),
            "-".repeat(empty),
            a,
            p,
        );
    }
    out
}
