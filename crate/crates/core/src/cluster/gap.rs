use std::io::Write;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, within_distance, KMeansConfig};
use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub k: usize,
    /// Intra-cluster distance of the fitted partition.
    pub w: f64,
    pub w_ref_mean: f64,
    pub w_ref_std: f64,
    /// `w_ref_mean - w`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapCurve {
    /// One entry per k, ascending.
    pub entries: Vec<GapEntry>,
}

impl GapCurve {
    pub fn max_gap(&self) -> f64 {
        self.entries.iter().map(|e| e.gap).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "W", "W_ref_mean", "W_ref_std", "gap"])?;
        for e in &self.entries {
            w.write_record([
                e.k.to_string(),
                e.w.to_string(),
                e.w_ref_mean.to_string(),
                e.w_ref_std.to_string(),
                e.gap.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn entry(points: &[Vec<f64>], k: usize, n_refs: usize, seed: u64, config: &KMeansConfig) -> Result<GapEntry, ClusterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let fitted = kmeans(points, k, rng.random(), config)?;
    let mut labels = fitted.assignments.clone();
    let refs: Vec<f64> = (0..n_refs)
        .map(|_| {
            labels.shuffle(&mut rng);
            within_distance(points, &labels, k)
        })
        .collect();
    let mean = refs.iter().sum::<f64>() / n_refs as f64;
    let var = if n_refs > 1 {
        refs.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n_refs - 1) as f64
    } else {
        0.0
    };
    Ok(GapEntry {
        k,
        w: fitted.inertia,
        w_ref_mean: mean,
        w_ref_std: var.sqrt(),
        gap: mean - fitted.inertia,
    })
}

/// Fits k-means for every k in `ks` and compares each fit with `n_refs`
/// size-preserving random relabelings of the same points.
///
/// Every k draws from its own random stream, so the curve does not depend
/// on the number of threads.
pub fn gap_curve(
    points: &[Vec<f64>],
    ks: RangeInclusive<usize>,
    n_refs: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<GapCurve, ClusterError> {
    if n_refs == 0 {
        return Err(ClusterError::InvalidRefs);
    }
    let (lo, hi) = (*ks.start(), *ks.end());
    if lo == 0 || lo > hi {
        return Err(ClusterError::InvalidRange { lo, hi });
    }
    if points.len() < hi {
        return Err(ClusterError::TooFewPoints { k: hi, n: points.len() });
    }
    let entries = ks
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| entry(points, k, n_refs, seed, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GapCurve { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KSelection {
    pub k: usize,
    /// False when the curve never flattened and `k` is simply the largest.
    pub saturated: bool,
}

/// Smallest k after which the next `window` marginal gains all stay below
/// `epsilon` times the largest gap.
///
/// # Panics
/// If the curve is empty.
pub fn select_k(curve: &GapCurve, epsilon: f64, window: usize) -> KSelection {
    let e = &curve.entries;
    assert!(!e.is_empty(), "select_k needs a nonempty curve");
    let threshold = epsilon * curve.max_gap().abs();
    for i in 0..e.len() {
        if i + window >= e.len() {
            break;
        }
        if (i + 1..=i + window).all(|j| e[j].gap - e[j - 1].gap < threshold) {
            return KSelection { k: e[i].k, saturated: true };
        }
    }
    KSelection {
        k: e[e.len() - 1].k,
        saturated: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(gaps: &[f64]) -> GapCurve {
        GapCurve {
            entries: gaps
                .iter()
                .enumerate()
                .map(|(i, &gap)| GapEntry {
                    k: i + 2,
                    w: 0.0,
                    w_ref_mean: gap,
                    w_ref_std: 0.0,
                    gap,
                })
                .collect(),
        }
    }

    #[test]
    fn linear_curve_is_unsaturated() {
        let c = curve(&(0..20).map(f64::from).collect::<Vec<_>>());
        assert_eq!(select_k(&c, 0.02, 3), KSelection { k: 21, saturated: false });
    }

    #[test]
    fn flat_after_six() {
        let c = curve(&[1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0, 5.0]);
        assert_eq!(select_k(&c, 0.02, 3), KSelection { k: 6, saturated: true });
    }

    #[test]
    fn zero_refs_rejected() {
        let pts = vec![vec![0.0]; 4];
        assert!(matches!(
            gap_curve(&pts, 2..=3, 0, 1, &KMeansConfig::default()),
            Err(ClusterError::InvalidRefs)
        ));
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        curve(&[1.5]).write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("k,W,W_ref_mean,W_ref_std,gap\n2,0,1.5,0,1.5\n"));
    }
}
