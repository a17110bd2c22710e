//! Exact or empirical distributions over the tokenizations of one word.

use std::collections::HashMap;
use std::io::Write;

use crate::error::Result;
use crate::token::Tokenization;

pub const REPORT_COLUMNS: [&str; 4] = ["word", "tokenization", "probability", "is_canonical"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Exact,
    Empirical { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub tokenization: Tokenization,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub word: String,
    /// Sorted by descending probability, ties by tokenization.
    pub rows: Vec<ReportRow>,
    pub kind: ReportKind,
    pub canonical: Tokenization,
}

impl DistributionReport {
    pub fn new(
        word: impl Into<String>,
        probs: impl IntoIterator<Item = (Tokenization, f64)>,
        kind: ReportKind,
        canonical: Tokenization,
    ) -> Self {
        let mut rows: Vec<ReportRow> = probs
            .into_iter()
            .map(|(tokenization, probability)| ReportRow {
                tokenization,
                probability,
            })
            .collect();
        rows.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then_with(|| a.tokenization.cmp(&b.tokenization))
        });
        DistributionReport {
            word: word.into(),
            rows,
            kind,
            canonical,
        }
    }

    pub fn probability(&self, t: &Tokenization) -> f64 {
        self.rows
            .iter()
            .find(|r| &r.tokenization == t)
            .map_or(0.0, |r| r.probability)
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.probability).sum()
    }

    pub fn as_map(&self) -> HashMap<&Tokenization, f64> {
        self.rows
            .iter()
            .map(|r| (&r.tokenization, r.probability))
            .collect()
    }

    /// Appends zero-probability rows for tokenizations not already present.
    pub fn pad_with(&mut self, support: impl IntoIterator<Item = Tokenization>) {
        for t in support {
            if !self.rows.iter().any(|r| r.tokenization == t) {
                self.rows.push(ReportRow {
                    tokenization: t,
                    probability: 0.0,
                });
            }
        }
    }

    /// Half the L1 distance to `other`, over the union of supports.
    pub fn total_variation(&self, other: &DistributionReport) -> f64 {
        let a = self.as_map();
        let b = other.as_map();
        let mut sum = 0.0;
        for (t, pa) in &a {
            sum += (pa - b.get(t).copied().unwrap_or(0.0)).abs();
        }
        for (t, pb) in &b {
            if !a.contains_key(t) {
                sum += pb;
            }
        }
        sum / 2.0
    }

    pub fn max_min_spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.probability).fold(f64::MIN, f64::max);
        let min = self.rows.iter().map(|r| r.probability).fold(f64::MAX, f64::min);
        if self.rows.is_empty() {
            0.0
        } else {
            max - min
        }
    }
}

/// Writes reports as delimited text with a single header row.
pub fn write_reports<W: Write>(
    out: W,
    reports: &[DistributionReport],
    delimiter: u8,
    marker: &str,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        for row in &r.rows {
            w.write_record([
                r.word.as_str(),
                &row.tokenization.to_marked_string(marker),
                &format!("{}", row.probability),
                if row.tokenization == r.canonical { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
