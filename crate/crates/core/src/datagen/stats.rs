use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DatagenError, LabeledExample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub examples: usize,
    pub context_mean: f64,
    pub followup_mean: f64,
    pub rewrite_mean: f64,
    /// Share of rewrite tokens whose text occurs in the context turn but
    /// not in the follow-up turn, pooled over all rewrite tokens.
    pub context_only_fraction: f64,
}

/// Corpus statistics published for the original logs-based datasets.
pub const REFERENCE_STATS: DatasetStats = DatasetStats {
    examples: 0,
    context_mean: 5.6,
    followup_mean: 5.2,
    rewrite_mean: 6.0,
    context_only_fraction: 0.47,
};

pub fn stats_report(examples: &[LabeledExample]) -> Result<DatasetStats, DatagenError> {
    if examples.is_empty() {
        return Err(DatagenError::EmptyDataset);
    }
    let (mut ctx, mut fu, mut rw, mut only) = (0usize, 0usize, 0usize, 0usize);
    for e in examples {
        ctx += e.context.len();
        fu += e.followup.len();
        rw += e.rewrite.len();
        let in_ctx: HashSet<&str> = e.context.iter().map(String::as_str).collect();
        let in_fu: HashSet<&str> = e.followup.iter().map(String::as_str).collect();
        only += e
            .rewrite
            .iter()
            .filter(|t| in_ctx.contains(t.as_str()) && !in_fu.contains(t.as_str()))
            .count();
    }
    let n = examples.len() as f64;
    Ok(DatasetStats {
        examples: examples.len(),
        context_mean: ctx as f64 / n,
        followup_mean: fu as f64 / n,
        rewrite_mean: rw as f64 / n,
        context_only_fraction: if rw == 0 { 0.0 } else { only as f64 / rw as f64 },
    })
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &REFERENCE_STATS;
        writeln!(f, "examples              {}", self.examples)?;
        writeln!(f, "{:<22}{:>8}{:>11}", "", "ours", "reference")?;
        writeln!(f, "{:<22}{:>8.2}{:>11.2}", "context tokens", self.context_mean, r.context_mean)?;
        writeln!(f, "{:<22}{:>8.2}{:>11.2}", "follow-up tokens", self.followup_mean, r.followup_mean)?;
        writeln!(f, "{:<22}{:>8.2}{:>11.2}", "rewrite tokens", self.rewrite_mean, r.rewrite_mean)?;
        write!(
            f,
            "{:<22}{:>8.2}{:>11.2}",
            "context-only share", self.context_only_fraction, r.context_only_fraction
        )
    }
}
