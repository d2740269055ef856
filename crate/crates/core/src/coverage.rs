//! Scoring extraction against a hand-checked corpus.
//!
//! The ground truth is a CSV file:
//!
//! ```text
//! package,expected_version,downloads,publications
//! ivreg2,4.1.11,120,40
//! nover,,3,0
//! ```
//!
//! The first two columns are fixed. A blank `expected_version` means the
//! package has no version string, and extraction is correct when it finds
//! nothing. Any further columns are weights; a blank weight cell counts as 1.
//! Each package is read from `<corpus>/<package>.ado`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoverageError, ExtractError};
use crate::starbang::Extractor;
use crate::version::{parse_version, SemVer};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub package: String,
    /// `None`: the package has no version string.
    pub expected_version: Option<SemVer>,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub package: String,
    pub expected: Option<String>,
    /// Extracted version, or `none`, `missing file`, `unreadable`.
    pub got: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub matched: usize,
    /// `None` for an empty corpus.
    pub rate_unweighted: Option<f64>,
    /// Per weight column; `None` when the column sums to zero.
    pub rate_by_weight: BTreeMap<String, Option<f64>>,
    pub mismatches: Vec<Mismatch>,
}

pub fn read_truth(path: &Path) -> Result<Vec<GroundTruthEntry>, CoverageError> {
    let text = fs::read_to_string(path).map_err(|source| CoverageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_truth(&text)
}

pub fn parse_truth(text: &str) -> Result<Vec<GroundTruthEntry>, CoverageError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("package") || headers.get(1) != Some("expected_version") {
        return Err(CoverageError::Row {
            row: 1,
            reason: "header must start with `package,expected_version`".to_string(),
        });
    }
    let weight_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();

    let mut entries = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 2;
        let bad = |reason: String| CoverageError::Row { row, reason };
        let package = record.get(0).unwrap_or_default().to_string();
        if package.is_empty() {
            return Err(bad("empty package name".to_string()));
        }
        let expected_version = match record.get(1).unwrap_or_default() {
            "" => None,
            v => Some(parse_version(v).map_err(|e| bad(e.to_string()))?),
        };
        let mut weights = BTreeMap::new();
        for (name, cell) in weight_names.iter().zip(record.iter().skip(2)) {
            let w = if cell.is_empty() {
                1.0
            } else {
                cell.parse::<f64>().map_err(|e| bad(format!("weight `{cell}`: {e}")))?
            };
            if !w.is_finite() || w < 0.0 {
                return Err(bad(format!("weight `{cell}` must be a non-negative number")));
            }
            weights.insert(name.clone(), w);
        }
        entries.push(GroundTruthEntry {
            package,
            expected_version,
            weights,
        });
    }
    Ok(entries)
}

enum Extracted {
    Version(SemVer),
    NoVersion,
    MissingFile,
    Unreadable,
}

fn extract(corpus: &Path, package: &str, extractor: &Extractor) -> Extracted {
    let path = corpus.join(format!("{package}.ado"));
    if !path.is_file() {
        return Extracted::MissingFile;
    }
    match extractor.extract_from_file(&path, package) {
        Ok(found) => Extracted::Version(found.record.version),
        Err(ExtractError::NoMatch { .. }) => Extracted::NoVersion,
        Err(ExtractError::Io { .. }) => Extracted::Unreadable,
    }
}

/// Score `entries` against files in `corpus`.
pub fn evaluate_entries(corpus: &Path, entries: &[GroundTruthEntry], extractor: &Extractor) -> CorpusStats {
    let outcomes: Vec<(bool, Option<Mismatch>)> = entries
        .par_iter()
        .map(|entry| {
            let got = extract(corpus, &entry.package, extractor);
            let matched = match (&entry.expected_version, &got) {
                (Some(want), Extracted::Version(v)) => want == v,
                (None, Extracted::NoVersion) => true,
                _ => false,
            };
            let mismatch = (!matched).then(|| Mismatch {
                package: entry.package.clone(),
                expected: entry.expected_version.map(|v| v.canonical()),
                got: match got {
                    Extracted::Version(v) => v.canonical(),
                    Extracted::NoVersion => "none".to_string(),
                    Extracted::MissingFile => "missing file".to_string(),
                    Extracted::Unreadable => "unreadable".to_string(),
                },
            });
            (matched, mismatch)
        })
        .collect();

    let total = entries.len();
    let matched = outcomes.iter().filter(|(m, _)| *m).count();
    let rate_unweighted = (total > 0).then(|| matched as f64 / total as f64);

    let mut names: Vec<&String> = entries.iter().flat_map(|e| e.weights.keys()).collect();
    names.sort();
    names.dedup();
    let rate_by_weight = names
        .into_iter()
        .map(|name| {
            let weight = |e: &GroundTruthEntry| e.weights.get(name).copied().unwrap_or(1.0);
            let first = entries.first().map(weight);
            let uniform = entries.iter().all(|e| Some(weight(e)) == first);
            let all: f64 = entries.iter().map(weight).sum();
            let rate = if all <= 0.0 {
                None
            } else if uniform {
                // Equal weights cancel; avoid rounding drift from the sums.
                rate_unweighted
            } else {
                let hit: f64 = entries
                    .iter()
                    .zip(&outcomes)
                    .filter(|(_, (m, _))| *m)
                    .map(|(e, _)| weight(e))
                    .sum();
                Some(hit / all)
            };
            (name.clone(), rate)
        })
        .collect();

    CorpusStats {
        total,
        matched,
        rate_unweighted,
        rate_by_weight,
        mismatches: outcomes.into_iter().filter_map(|(_, m)| m).collect(),
    }
}

pub fn evaluate(corpus: &Path, truth: &Path, extractor: &Extractor) -> Result<CorpusStats, CoverageError> {
    Ok(evaluate_entries(corpus, &read_truth(truth)?, extractor))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

fn percent(rate: Option<f64>) -> String {
    rate.map_or_else(|| "n/a".to_string(), |r| format!("{:.1}%", r * 100.0))
}

fn fraction(rate: Option<f64>) -> String {
    rate.map_or_else(|| "n/a".to_string(), |r| format!("{r:.6}"))
}

/// Render stats.
///
/// CSV columns are `record,name,value,expected,got`, with `record` one of
/// `count` (`total`/`matched`), `rate` (`unweighted` or `weight:<column>`) or
/// `mismatch` (one row per package, `value` empty).
pub fn report(stats: &CorpusStats, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "packages: {}  matched: {}", stats.total, stats.matched);
            let _ = writeln!(out, "unweighted: {}", percent(stats.rate_unweighted));
            for (name, rate) in &stats.rate_by_weight {
                let _ = writeln!(out, "weighted by {name}: {}", percent(*rate));
            }
            if !stats.mismatches.is_empty() {
                out.push_str("mismatches:\n");
                for m in &stats.mismatches {
                    let _ = writeln!(
                        out,
                        "  {}: expected {}, got {}",
                        m.package,
                        m.expected.as_deref().unwrap_or("none"),
                        m.got
                    );
                }
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut row = |cells: [&str; 5]| w.write_record(cells).expect("in-memory write");
            row(["record", "name", "value", "expected", "got"]);
            row(["count", "total", &stats.total.to_string(), "", ""]);
            row(["count", "matched", &stats.matched.to_string(), "", ""]);
            row(["rate", "unweighted", &fraction(stats.rate_unweighted), "", ""]);
            for (name, rate) in &stats.rate_by_weight {
                row(["rate", &format!("weight:{name}"), &fraction(*rate), "", ""]);
            }
            for m in &stats.mismatches {
                row(["mismatch", &m.package, "", m.expected.as_deref().unwrap_or(""), &m.got]);
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
        }
        ReportFormat::Json => serde_json::to_string_pretty(stats).expect("serializable") + "\n",
    }
}
