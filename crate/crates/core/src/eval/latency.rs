use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledExample;
use crate::edit_engine::TokenSequence;
use crate::model::network::encoder_passes;
use crate::model::Rewriter;

use super::EvalError;

pub const MIN_REPS: usize = 100;

/// Rewrite lengths the benchmark draws queries from.
const LENGTHS: std::ops::RangeInclusive<usize> = 2..=15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBucket {
    pub length: usize,
    pub queries: usize,
    pub mean_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyReport {
    pub queries: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub mean_us: f64,
    /// Regression coefficient of latency on gold rewrite length, with
    /// input length as a second regressor.
    pub slope_us_per_token: f64,
    /// `slope_us_per_token / p50_us`.
    pub normalized_slope: f64,
    /// Coefficient of the input length in the same regression.
    pub input_slope_us_per_token: f64,
    /// Slope against rewrite length alone, without controlling for input
    /// length.
    pub raw_slope_us_per_token: f64,
    pub encoder_passes_per_query: f64,
    pub by_rewrite_length: Vec<LengthBucket>,
    pub by_input_length: Vec<LengthBucket>,
    pub hardware: String,
}

fn hardware_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_owned())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_owned());
    format!("{cpu}; single thread")
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Least squares for `y = b0 + b1 x1 + ... `; `None` if singular.
fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first()?.len() + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &yv) in rows.iter().zip(y) {
        let x: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        for i in 0..k {
            for j in 0..k {
                a[i][j] += x[i] * x[j];
            }
            a[i][k] += x[i] * yv;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

fn buckets(pairs: impl Iterator<Item = (usize, f64)>) -> Vec<LengthBucket> {
    let mut m: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (len, us) in pairs {
        let e = m.entry(len).or_default();
        e.0 += 1;
        e.1 += us;
    }
    m.into_iter()
        .map(|(length, (queries, sum))| LengthBucket {
            length,
            queries,
            mean_us: sum / queries as f64,
        })
        .collect()
}

/// Times single queries (predict, decode, apply) one at a time on the
/// calling thread.
///
/// Queries cycle through the rewrite lengths 2..=15 present in `dataset`
/// so every length is equally represented.
pub fn latency_bench(
    rewriter: &Rewriter,
    dataset: &[LabeledExample],
    warmup: usize,
    reps: usize,
) -> Result<LatencyReport, EvalError> {
    if reps < MIN_REPS {
        return Err(EvalError::InsufficientSamples { need: MIN_REPS, got: reps });
    }
    let mut by_len: BTreeMap<usize, Vec<(TokenSequence, usize)>> = BTreeMap::new();
    for e in dataset {
        if LENGTHS.contains(&e.rewrite.len()) {
            let seq = e.sequence()?;
            if seq.len() <= rewriter.checkpoint.config.max_len {
                by_len.entry(e.rewrite.len()).or_default().push((seq, e.rewrite.len()));
            }
        }
    }
    if by_len.len() < 2 {
        return Err(EvalError::EmptyDataset);
    }
    let lists: Vec<&Vec<(TokenSequence, usize)>> = by_len.values().collect();
    let pick = |i: usize| {
        let l = lists[i % lists.len()];
        &l[(i / lists.len()) % l.len()]
    };
    for i in 0..warmup {
        rewriter.predict(&pick(i).0)?;
    }
    let passes_before = encoder_passes();
    let mut samples = Vec::with_capacity(reps);
    for i in 0..reps {
        let (seq, len) = pick(i);
        let t = Instant::now();
        let p = rewriter.predict(seq)?;
        let us = t.elapsed().as_secs_f64() * 1e6;
        std::hint::black_box(&p);
        samples.push((seq.len(), *len, us));
    }
    let passes = encoder_passes() - passes_before;

    let mut sorted: Vec<f64> = samples.iter().map(|s| s.2).collect();
    sorted.sort_by(f64::total_cmp);
    let p50 = percentile(&sorted, 0.50);
    let p95 = percentile(&sorted, 0.95);
    let y: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let both: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.1 as f64, s.0 as f64]).collect();
    let (slope, input_slope) = match ols(&both, &y) {
        Some(b) => (b[1], b[2]),
        None => {
            let raw: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.1 as f64]).collect();
            (ols(&raw, &y).map_or(0.0, |b| b[1]), 0.0)
        }
    };
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.1 as f64]).collect();
    let raw_slope = ols(&raw, &y).map_or(0.0, |b| b[1]);
    Ok(LatencyReport {
        queries: reps,
        p50_us: p50,
        p95_us: p95,
        mean_us: y.iter().sum::<f64>() / reps as f64,
        slope_us_per_token: slope,
        normalized_slope: slope / p50,
        input_slope_us_per_token: input_slope,
        raw_slope_us_per_token: raw_slope,
        encoder_passes_per_query: passes as f64 / reps as f64,
        by_rewrite_length: buckets(samples.iter().map(|s| (s.1, s.2))),
        by_input_length: buckets(samples.iter().map(|s| (s.0, s.2))),
        hardware: hardware_note(),
    })
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "queries            {}", self.queries)?;
        writeln!(f, "hardware           {}", self.hardware)?;
        writeln!(f, "p50 / p95 / mean   {:.1} / {:.1} / {:.1} us", self.p50_us, self.p95_us, self.mean_us)?;
        writeln!(
            f,
            "rewrite-length slope {:+.3} us/token ({:+.2}% of p50), raw {:+.3}",
            self.slope_us_per_token,
            100.0 * self.normalized_slope,
            self.raw_slope_us_per_token
        )?;
        writeln!(f, "input-length slope {:+.3} us/token", self.input_slope_us_per_token)?;
        writeln!(f, "encoder passes per query {:.3}", self.encoder_passes_per_query)?;
        writeln!(f, "{:>8}  {:>7}  {:>9}", "rewrite", "queries", "mean us")?;
        for b in &self.by_rewrite_length {
            writeln!(f, "{:>8}  {:>7}  {:>9.1}", b.length, b.queries, b.mean_us)?;
        }
        writeln!(f, "{:>8}  {:>7}  {:>9}", "input", "queries", "mean us")?;
        for b in &self.by_input_length {
            writeln!(f, "{:>8}  {:>7}  {:>9.1}", b.length, b.queries, b.mean_us)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 50.0);
        assert_eq!(percentile(&v, 0.95), 95.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn regression_recovers_coefficients() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 5) as f64 * 2.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 + 0.5 * r[0] - 1.25 * r[1]).collect();
        let b = ols(&rows, &y).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-9 && (b[1] - 0.5).abs() < 1e-9 && (b[2] + 1.25).abs() < 1e-9);
        let collinear: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(ols(&collinear, &[0.0; 10]).is_none());
    }
}
