//! Per-iteration trajectories of optimizer and estimator runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub iteration: usize,
    pub cumulative_evals: u64,
    pub objective: f64,
    pub seed: u64,
    pub method: String,
}

/// One trajectory: a (seed, method) pair plus the digest of the config that
/// produced it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub config_digest: Option<String>,
}

pub const RUN_RECORD_HEADER: &str = "iteration,cumulative_evals,objective,seed,method";

impl RunRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RunRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }

    /// Rows ordered by iteration with nondecreasing evaluation counts.
    pub fn is_well_formed(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[0].iteration < w[1].iteration && w[0].cumulative_evals <= w[1].cumulative_evals)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "{RUN_RECORD_HEADER}")?;
        }
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.cumulative_evals, r.objective, r.seed, r.method
            )?;
        }
        Ok(())
    }
}
