use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::BenchError;

fn hits<T: Ord>(ranked: &[T], targets: &BTreeSet<T>, k: usize) -> Result<usize, BenchError> {
    if targets.is_empty() {
        return Err(BenchError::EmptyTargets);
    }
    Ok(ranked.iter().take(k).filter(|r| targets.contains(*r)).count())
}

/// Share of the first `k` suggestions that are targets. Always divides by `k`.
pub fn precision_at_k<T: Ord>(ranked: &[T], targets: &BTreeSet<T>, k: usize) -> Result<f64, BenchError> {
    Ok(hits(ranked, targets, k)? as f64 / k as f64)
}

/// Share of the targets found among the first `k` suggestions.
pub fn recall_at_k<T: Ord>(ranked: &[T], targets: &BTreeSet<T>, k: usize) -> Result<f64, BenchError> {
    Ok(hits(ranked, targets, k)? as f64 / targets.len() as f64)
}

/// Reciprocal rank of the first target; 0 when no target is ranked.
pub fn reciprocal_rank<T: Ord>(ranked: &[T], targets: &BTreeSet<T>) -> Result<f64, BenchError> {
    if targets.is_empty() {
        return Err(BenchError::EmptyTargets);
    }
    Ok(ranked
        .iter()
        .position(|r| targets.contains(r))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// Metrics of a single ranking.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntryMetrics {
    pub prec1: f64,
    pub prec3: f64,
    pub prec5: f64,
    pub prec10: f64,
    pub rec5: f64,
    pub rec10: f64,
    pub rr: f64,
}

impl EntryMetrics {
    pub fn of<T: Ord>(ranked: &[T], targets: &BTreeSet<T>) -> Result<Self, BenchError> {
        Ok(Self {
            prec1: precision_at_k(ranked, targets, 1)?,
            prec3: precision_at_k(ranked, targets, 3)?,
            prec5: precision_at_k(ranked, targets, 5)?,
            prec10: precision_at_k(ranked, targets, 10)?,
            rec5: recall_at_k(ranked, targets, 5)?,
            rec10: recall_at_k(ranked, targets, 10)?,
            rr: reciprocal_rank(ranked, targets)?,
        })
    }
}

/// Metrics averaged uniformly over benchmark entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_entries: usize,
    pub prec1: f64,
    pub prec3: f64,
    pub prec5: f64,
    pub prec10: f64,
    pub rec5: f64,
    pub rec10: f64,
    pub mrr: f64,
}

impl MetricsReport {
    /// Averages in the given order, so equal inputs give equal bits.
    pub fn average(entries: &[EntryMetrics]) -> Self {
        let mut r = MetricsReport {
            n_entries: entries.len(),
            ..Default::default()
        };
        for e in entries {
            r.prec1 += e.prec1;
            r.prec3 += e.prec3;
            r.prec5 += e.prec5;
            r.prec10 += e.prec10;
            r.rec5 += e.rec5;
            r.rec10 += e.rec10;
            r.mrr += e.rr;
        }
        if !entries.is_empty() {
            let n = entries.len() as f64;
            for x in [
                &mut r.prec1,
                &mut r.prec3,
                &mut r.prec5,
                &mut r.prec10,
                &mut r.rec5,
                &mut r.rec10,
                &mut r.mrr,
            ] {
                *x /= n;
            }
        }
        r
    }
}
