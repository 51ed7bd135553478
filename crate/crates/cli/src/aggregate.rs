//! Per-iteration median and inter-quartile range across seeds.
//!
//! Medians use the lower-median convention for even counts and quartiles
//! are nearest-rank, so every reported value is one of the inputs.

use std::collections::BTreeMap;
use std::io::Write;

use dppmc::RunRecord;

pub const SUMMARY_HEADER: &str = "method,iteration,cumulative_evals,median,q1,q3,seeds";

/// Element of rank ⌈p·n⌉ (1-based) of the sorted values, p in (0, 1].
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "nearest_rank of an empty slice");
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn lower_median(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty(), "median of an empty slice");
    sorted[(sorted.len() - 1) / 2]
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub iteration: usize,
    pub cumulative_evals: u64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub seeds: usize,
}

/// One row per (method, iteration), ordered by method then iteration.
/// `cumulative_evals` is the lower median of the per-seed counts.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), (Vec<f64>, Vec<u64>)> = BTreeMap::new();
    for rec in records {
        for row in &rec.rows {
            let entry = groups.entry((row.method.clone(), row.iteration)).or_default();
            entry.0.push(row.objective);
            entry.1.push(row.cumulative_evals);
        }
    }
    groups
        .into_iter()
        .map(|((method, iteration), (objectives, mut evals))| {
            let s = sorted(&objectives);
            evals.sort_unstable();
            SummaryRow {
                method,
                iteration,
                cumulative_evals: evals[(evals.len() - 1) / 2],
                median: lower_median(&s),
                q1: nearest_rank(&s, 0.25),
                q3: nearest_rank(&s, 0.75),
                seeds: s.len(),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], digest: &str, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# config_digest={digest}")?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method, r.iteration, r.cumulative_evals, r.median, r.q1, r.q3, r.seeds
        )?;
    }
    Ok(())
}
