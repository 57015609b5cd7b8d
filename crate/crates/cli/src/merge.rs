//! Merging of report CSVs from separate runs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use posebench::metrics::{read_report_csv, MetricsReport, ReportRow};
use posebench::mocap_io::ReferenceTable;

type Key = (String, Option<u64>, String, String);

fn key(row: &ReportRow) -> Key {
    (row.condition.clone(), row.level.map(f64::to_bits), row.subset.to_string(), row.model.clone())
}

fn describe(k: &Key) -> String {
    let level = k.1.map(|b| f64::from_bits(b).to_string()).unwrap_or_else(|| "-".into());
    format!("(condition {}, level {level}, subset {}, model {})", k.0, k.2, k.3)
}

/// Unions the rows of several reports. Rows with the same key must agree;
/// identical repeats collapse into one. With a reference table, deltas are
/// recomputed against `reference_model`.
pub fn merge_reports(reports: &[MetricsReport], reference: Option<(&ReferenceTable, &str)>) -> Result<MetricsReport> {
    let mut rows: BTreeMap<Key, ReportRow> = BTreeMap::new();
    let mut conflicts = Vec::new();
    for report in reports {
        for row in &report.rows {
            let k = key(row);
            match rows.get(&k) {
                Some(existing) if existing != row => conflicts.push(describe(&k)),
                Some(_) => {}
                None => {
                    rows.insert(k, row.clone());
                }
            }
        }
    }
    if !conflicts.is_empty() {
        conflicts.sort();
        conflicts.dedup();
        bail!("conflicting rows for {} key(s):\n  {}", conflicts.len(), conflicts.join("\n  "));
    }
    let mut merged = MetricsReport { rows: rows.into_values().collect(), ..Default::default() };
    if let Some((table, model)) = reference {
        merged.attach_reference(table, model);
    }
    merged.sort();
    Ok(merged)
}

pub fn read_report_file(path: &Path) -> Result<MetricsReport> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read report {}", path.display()))?;
    read_report_csv(&bytes).with_context(|| format!("report {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use posebench::metrics::{BodySubset, MetricTriple};
    use posebench::mocap_io::{load_reference_table, REFERENCE_TABLE1_CSV};

    fn row(condition: &str, level: Option<f64>, subset: BodySubset, mpjpe: f64) -> ReportRow {
        ReportRow {
            condition: condition.into(),
            level,
            model: "ik".into(),
            subset,
            metrics: MetricTriple { mpjpe_cm: mpjpe, mpjre_deg: 1.0, mpjve_cmps: 2.0 },
            reference_model: None,
            delta: None,
        }
    }

    fn report(rows: Vec<ReportRow>) -> MetricsReport {
        MetricsReport { rows, ..Default::default() }
    }

    #[test]
    fn disjoint_reports_concatenate_sorted() {
        let a = report(vec![row("noise", Some(2.0), BodySubset::Up, 3.0), row("clean", None, BodySubset::Low, 1.0)]);
        let b = report(vec![row("delay", Some(2.0), BodySubset::Up, 2.0)]);
        let m = merge_reports(&[a.clone(), b.clone()], None).unwrap();
        let mut expected = report([a.rows, b.rows].concat());
        expected.sort();
        assert_eq!(m.rows, expected.rows);
        assert_eq!(m.rows[0].condition, "clean");
    }

    #[test]
    fn identical_duplicates_collapse() {
        let a = report(vec![row("clean", None, BodySubset::Up, 1.0)]);
        assert_eq!(merge_reports(&[a.clone(), a], None).unwrap().rows.len(), 1);
    }

    #[test]
    fn conflicting_duplicate_is_an_error_naming_the_key() {
        let a = report(vec![row("noise", Some(1.0), BodySubset::Up, 1.0)]);
        let b = report(vec![row("noise", Some(1.0), BodySubset::Up, 1.5)]);
        let e = merge_reports(&[a, b], None).unwrap_err().to_string();
        assert!(e.contains("condition noise, level 1, subset Up, model ik"), "{e}");
    }

    #[test]
    fn reference_adds_deltas() {
        let table = load_reference_table(REFERENCE_TABLE1_CSV.as_bytes()).unwrap();
        let a = report(vec![row("clean", None, BodySubset::Up, 1.0), row("noise", Some(7.0), BodySubset::Up, 1.0)]);
        let m = merge_reports(&[a], Some((&table, "avatarposer"))).unwrap();
        let d = m.rows[0].delta.unwrap();
        assert!((d.mpjpe_cm - (1.0 - 0.72)).abs() < 1e-12);
        assert_eq!(m.rows[0].reference_model.as_deref(), Some("avatarposer"));
        assert!(m.rows[1].delta.is_none());
    }
}
