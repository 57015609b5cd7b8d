use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::Serialize;

use super::{BodySubset, MetricTriple};
use crate::error::{Error, Result};
use crate::mocap_io::ReferenceTable;

pub const REPORT_HEADER: [&str; 11] = [
    "condition",
    "level",
    "model",
    "subset",
    "mpjpe",
    "mpjre",
    "mpjve",
    "reference_model",
    "delta_mpjpe",
    "delta_mpjre",
    "delta_mpjve",
];

/// One measured (condition, level, model, subset) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredRow {
    pub condition: String,
    pub level: Option<f64>,
    pub model: String,
    pub subset: BodySubset,
    pub metrics: MetricTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub condition: String,
    pub level: Option<f64>,
    pub model: String,
    pub subset: BodySubset,
    pub metrics: MetricTriple,
    pub reference_model: Option<String>,
    /// measured minus reference
    pub delta: Option<MetricTriple>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub seeds: Vec<u64>,
    pub clips: Vec<String>,
    /// Seconds since the Unix epoch. Kept out of the CSV so reports stay
    /// byte-reproducible.
    pub created_unix_s: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

/// Reference-table condition name for a measured condition. The
/// artifact-free run compares against the ground-truth Cartesian row.
fn reference_condition(condition: &str) -> &str {
    match condition {
        "clean" => "gt_cart",
        other => other,
    }
}

fn condition_rank(condition: &str) -> usize {
    ["sparse", "clean", "gt_cart", "noise", "occlusion", "fps_ratio", "delay"]
        .iter()
        .position(|c| *c == condition)
        .unwrap_or(usize::MAX)
}

fn row_order(a: &ReportRow, b: &ReportRow) -> Ordering {
    condition_rank(&a.condition)
        .cmp(&condition_rank(&b.condition))
        .then_with(|| a.condition.cmp(&b.condition))
        .then_with(|| match (a.level, b.level) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (x, y) => x.is_some().cmp(&y.is_some()),
        })
        .then_with(|| a.model.cmp(&b.model))
        .then_with(|| a.subset.cmp(&b.subset))
}

impl MetricsReport {
    /// Sorts rows in table order: condition, level, model, subset.
    pub fn sort(&mut self) {
        self.rows.sort_by(row_order);
    }

    /// Recomputes every delta against `reference` rows of `reference_model`.
    pub fn attach_reference(&mut self, reference: &ReferenceTable, reference_model: &str) {
        for row in &mut self.rows {
            let found = reference.lookup(reference_condition(&row.condition), row.level, reference_model, row.subset);
            row.reference_model = found.map(|_| reference_model.to_string());
            row.delta = found.map(|r| MetricTriple {
                mpjpe_cm: row.metrics.mpjpe_cm - r.mpjpe_cm,
                mpjre_deg: row.metrics.mpjre_deg - r.mpjre_deg,
                mpjve_cmps: row.metrics.mpjve_cmps - r.mpjve_cmps,
            });
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(REPORT_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.write_record(cells(row)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Aligned-column markdown table.
    pub fn to_markdown(&self) -> String {
        let table: Vec<Vec<String>> = self.rows.iter().map(cells).collect();
        let widths: Vec<usize> = (0..REPORT_HEADER.len())
            .map(|c| table.iter().map(|r| r[c].len()).chain([REPORT_HEADER[c].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[&str]| {
            let mut s = String::from("|");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(s, " {c:<w$} |");
            }
            s.push('\n');
            s
        };
        let mut out = line(&REPORT_HEADER);
        out.push('|');
        for w in &widths {
            let _ = write!(out, "{}|", "-".repeat(w + 2));
        }
        out.push('\n');
        for row in &table {
            out += &line(&row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        out
    }
}

fn cells(row: &ReportRow) -> Vec<String> {
    let num = |v: f64| format!("{v:.4}");
    let delta = |f: fn(&MetricTriple) -> f64| row.delta.as_ref().map(|d| num(f(d))).unwrap_or_default();
    vec![
        row.condition.clone(),
        row.level.map(|l| l.to_string()).unwrap_or_default(),
        row.model.clone(),
        row.subset.label().to_string(),
        num(row.metrics.mpjpe_cm),
        num(row.metrics.mpjre_deg),
        num(row.metrics.mpjve_cmps),
        row.reference_model.clone().unwrap_or_default(),
        delta(|d| d.mpjpe_cm),
        delta(|d| d.mpjre_deg),
        delta(|d| d.mpjve_cmps),
    ]
}

/// Sorted report with deltas against `reference_model` rows of `reference`
/// where such a row exists.
pub fn build_report(
    results: Vec<MeasuredRow>,
    reference: Option<&ReferenceTable>,
    reference_model: &str,
    metadata: ReportMetadata,
) -> MetricsReport {
    let rows = results
        .into_iter()
        .map(|r| ReportRow {
            condition: r.condition,
            level: r.level,
            model: r.model,
            subset: r.subset,
            metrics: r.metrics,
            reference_model: None,
            delta: None,
        })
        .collect();
    let mut report = MetricsReport { rows, metadata };
    if let Some(reference) = reference {
        report.attach_reference(reference, reference_model);
    }
    report.sort();
    report
}

/// Reads a CSV written by [`MetricsReport::to_csv`].
pub fn read_report_csv(bytes: &[u8]) -> Result<MetricsReport> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(Error::ReferenceRow { row: 0, message: format!("expected header {}", REPORT_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let err = |message: String| Error::ReferenceRow { row, message };
        let number = |col: usize| -> Result<f64> {
            record[col].parse().map_err(|_| err(format!("malformed number `{}` in column {}", &record[col], REPORT_HEADER[col])))
        };
        let optional = |col: usize| -> Result<Option<f64>> {
            if record[col].is_empty() {
                Ok(None)
            } else {
                number(col).map(Some)
            }
        };
        let subset = BodySubset::parse(&record[3]).ok_or_else(|| err(format!("unknown subset `{}`", &record[3])))?;
        let delta = match (optional(8)?, optional(9)?, optional(10)?) {
            (Some(a), Some(b), Some(c)) => Some(MetricTriple { mpjpe_cm: a, mpjre_deg: b, mpjve_cmps: c }),
            (None, None, None) => None,
            _ => return Err(err("delta columns must be all present or all empty".into())),
        };
        rows.push(ReportRow {
            condition: record[0].to_string(),
            level: optional(1)?,
            model: record[2].to_string(),
            subset,
            metrics: MetricTriple { mpjpe_cm: number(4)?, mpjre_deg: number(5)?, mpjve_cmps: number(6)? },
            reference_model: Some(record[7].to_string()).filter(|s| !s.is_empty()),
            delta,
        });
    }
    Ok(MetricsReport { rows, metadata: ReportMetadata::default() })
}
