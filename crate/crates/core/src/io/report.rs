//! Benchmark rows as CSV, per-method JSON summaries and reference-length
//! tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 8] = [
    "instance",
    "n",
    "method",
    "length",
    "ref_length",
    "gap_pct",
    "seconds",
    "seed",
];

/// One (instance, method, seed) cell of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub method: String,
    pub length: f64,
    pub ref_length: Option<f64>,
    /// `(length - ref_length) / ref_length`, a fraction.
    pub gap: Option<f64>,
    pub seconds: Option<f64>,
    pub seed: u64,
}

impl BenchRow {
    /// Builds a row, computing the gap from the two lengths.
    pub fn new(
        instance: impl Into<String>,
        n: usize,
        method: impl Into<String>,
        length: f64,
        ref_length: Option<f64>,
        seconds: Option<f64>,
        seed: u64,
    ) -> Self {
        Self {
            instance: instance.into(),
            n,
            method: method.into(),
            length,
            ref_length,
            gap: ref_length.and_then(|r| gap_fraction(length, r)),
            seconds,
            seed,
        }
    }

    pub fn gap_pct(&self) -> Option<f64> {
        self.gap.map(|g| g * 100.0)
    }
}

fn gap_fraction(length: f64, reference: f64) -> Option<f64> {
    (reference > 0.0 && reference.is_finite()).then(|| (length - reference) / reference)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows sorted by (instance, method); the sort is stable so repeated seeds
/// keep their input order.
pub fn sorted_rows(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| (&a.instance, &a.method).cmp(&(&b.instance, &b.method)));
    rows
}

pub fn write_report_csv<W: Write>(rows: &[BenchRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(REPORT_HEADER)?;
    for r in sorted_rows(rows) {
        w.write_record([
            r.instance.clone(),
            r.n.to_string(),
            r.method.clone(),
            r.length.to_string(),
            opt(r.ref_length),
            opt(r.gap_pct()),
            opt(r.seconds),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field(rec: &csv::StringRecord, k: usize, line: usize) -> Result<&str> {
    rec.get(k).ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing column {}", REPORT_HEADER[k]),
    })
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("malformed {what} {s:?}"),
    })
}

fn parse_opt(s: &str, line: usize, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, line, what).map(Some)
    }
}

/// Reads a report written by [`write_report_csv`]. The gap is recomputed
/// from the lengths; the stored percentage only has to agree with it.
pub fn read_report_csv<R: Read>(src: R) -> Result<Vec<BenchRow>> {
    let mut rd = csv::Reader::from_reader(src);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let length = parse_f64(field(&rec, 3, line)?, line, "length")?;
        let ref_length = parse_opt(field(&rec, 4, line)?, line, "ref_length")?;
        let stored = parse_opt(field(&rec, 5, line)?, line, "gap_pct")?;
        let row = BenchRow::new(
            field(&rec, 0, line)?,
            field(&rec, 1, line)?.parse().map_err(|_| Error::Parse {
                line,
                msg: "malformed n".into(),
            })?,
            field(&rec, 2, line)?,
            length,
            ref_length,
            parse_opt(field(&rec, 6, line)?, line, "seconds")?,
            field(&rec, 7, line)?.parse().map_err(|_| Error::Parse {
                line,
                msg: "malformed seed".into(),
            })?,
        );
        match (stored, row.gap_pct()) {
            (None, None) => {}
            (Some(s), Some(g)) if (s - g).abs() <= 1e-10 * g.abs().max(1.0) => {}
            _ => {
                return Err(Error::Data(format!(
                    "line {line}: stored gap {stored:?} does not match lengths"
                )))
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_gap_pct: Option<f64>,
    /// Sample standard deviation over rows.
    pub std_gap_pct: Option<f64>,
    pub mean_seconds: Option<f64>,
    pub n_instances: usize,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation; 0 for a single value.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// One summary per method, in method-name order.
pub fn summarize(rows: &[BenchRow]) -> Vec<MethodSummary> {
    let mut by: BTreeMap<&str, Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        by.entry(&r.method).or_default().push(r);
    }
    by.into_iter()
        .map(|(method, rs)| {
            let gaps: Vec<f64> = rs.iter().filter_map(|r| r.gap_pct()).collect();
            let secs: Vec<f64> = rs.iter().filter_map(|r| r.seconds).collect();
            let instances: BTreeSet<&str> = rs.iter().map(|r| r.instance.as_str()).collect();
            MethodSummary {
                method: method.to_string(),
                mean_gap_pct: mean(&gaps),
                std_gap_pct: sample_std(&gaps),
                mean_seconds: mean(&secs),
                n_instances: instances.len(),
            }
        })
        .collect()
}

pub fn write_summary_json<W: Write>(rows: &[BenchRow], mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, &summarize(rows))?;
    writeln!(sink)?;
    Ok(())
}

/// A row of the bundled TSPLIB reference table: the reference tour length
/// and a published solver length, both on normalized coordinates, and the
/// gap printed alongside them (3 decimals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub n: usize,
    pub ref_length: f64,
    pub ideq_length: f64,
    pub gap_pct: f64,
}

const BUNDLED_REFERENCE: &str = include_str!("../../fixtures/tsplib_reference.csv");

pub fn bundled_reference() -> Vec<ReferenceRow> {
    read_reference_csv(BUNDLED_REFERENCE.as_bytes()).expect("bundled reference table is valid")
}

pub fn read_reference_csv<R: Read>(src: R) -> Result<Vec<ReferenceRow>> {
    let mut rd = csv::Reader::from_reader(src);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Reference length by instance name, with or without a `.tsp` suffix.
pub fn reference_length(table: &[ReferenceRow], name: &str) -> Option<f64> {
    let key = name.trim_end_matches(".tsp");
    table
        .iter()
        .find(|r| r.name.trim_end_matches(".tsp") == key)
        .map(|r| r.ref_length)
}
