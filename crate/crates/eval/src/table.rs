use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{summarize, Summary};
use crate::run::LapReport;

pub const DNF_CELL: &str = "Overfit/DNF";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model_id: String,
    /// One entry per column of [`ComparisonTable::tracks`].
    pub cells: Vec<Option<Summary>>,
}

/// Models against tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub tracks: Vec<String>,
    /// Sorted by model id.
    pub rows: Vec<TableRow>,
    /// Per track, the row with the lowest mean among finished runs.
    pub best: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

fn finished(s: &Summary) -> Option<f64> {
    if s.dnf.is_some() {
        None
    } else {
        s.mean
    }
}

/// Builds the table. Tracks keep the order in which they first appear; a
/// later report for the same model and track replaces an earlier one.
pub fn compare(reports: &[LapReport]) -> ComparisonTable {
    let mut tracks: Vec<String> = Vec::new();
    for r in reports {
        if !tracks.contains(&r.track_id) {
            tracks.push(r.track_id.clone());
        }
    }
    let mut by_model: BTreeMap<&str, Vec<Option<Summary>>> = BTreeMap::new();
    for r in reports {
        let col = tracks.iter().position(|t| *t == r.track_id).expect("collected above");
        let cells = by_model
            .entry(r.model_id.as_str())
            .or_insert_with(|| vec![None; tracks.len()]);
        cells[col] = Some(summarize(r));
    }
    let rows: Vec<TableRow> = by_model
        .into_iter()
        .map(|(m, cells)| TableRow {
            model_id: m.to_string(),
            cells,
        })
        .collect();
    let best = (0..tracks.len())
        .map(|col| {
            rows.iter()
                .enumerate()
                .filter_map(|(i, r)| r.cells[col].as_ref().and_then(finished).map(|m| (i, m)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
        })
        .collect();
    ComparisonTable { tracks, rows, best }
}

fn time_cell(s: &Option<Summary>) -> String {
    match s {
        None => String::new(),
        Some(s) => match finished(s) {
            None => DNF_CELL.to_string(),
            Some(m) => match s.std {
                Some(sd) => format!("{m:.2} (±{sd:.2})"),
                None => format!("{m:.2} (±n/a)"),
            },
        },
    }
}

fn pad(cells: &[String], widths: &[usize]) -> String {
    let parts: Vec<String> = cells
        .iter()
        .zip(widths)
        .map(|(c, &w)| format!("{c:<w$}", w = w))
        .collect();
    format!("| {} |", parts.join(" | "))
}

fn grid(rows: &[Vec<String>]) -> String {
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    out.push_str(&pad(&rows[0], &widths));
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&pad(&rule, &widths));
    out.push('\n');
    for r in &rows[1..] {
        out.push_str(&pad(r, &widths));
        out.push('\n');
    }
    out
}

/// Markdown-style text (best time per track in bold, followed by the
/// deviation and response columns) and a CSV of the times alone.
pub fn render_table(table: &ComparisonTable) -> RenderedTable {
    let mut times = vec![std::iter::once("Model".to_string())
        .chain(table.tracks.iter().cloned())
        .collect::<Vec<_>>()];
    let mut csv = String::new();
    csv.push_str(&times[0].iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
    csv.push('\n');
    for (i, row) in table.rows.iter().enumerate() {
        let plain: Vec<String> = row.cells.iter().map(time_cell).collect();
        let shown = plain
            .iter()
            .enumerate()
            .map(|(col, c)| {
                if table.best[col] == Some(i) {
                    format!("**{c}**")
                } else {
                    c.clone()
                }
            })
            .collect::<Vec<_>>();
        times.push(std::iter::once(row.model_id.clone()).chain(shown).collect());
        let fields: Vec<String> = std::iter::once(row.model_id.as_str())
            .chain(plain.iter().map(String::as_str))
            .map(csv_field)
            .collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }

    let mut detail = vec![std::iter::once("Model".to_string())
        .chain(table.tracks.iter().flat_map(|t| [format!("{t} deviations"), format!("{t} response (s)")]))
        .collect::<Vec<_>>()];
    for row in &table.rows {
        let mut r = vec![row.model_id.clone()];
        for c in &row.cells {
            match c {
                None => r.extend([String::new(), String::new()]),
                Some(s) => {
                    r.push(s.deviations.to_string());
                    r.push(s.response_speed.map_or("n/a".into(), |v| format!("{v:.2}")));
                }
            }
        }
        detail.push(r);
    }
    let text = format!("Lap time, mean (±std) in seconds\n\n{}\n{}", grid(&times), grid(&detail));
    RenderedTable { text, csv }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
