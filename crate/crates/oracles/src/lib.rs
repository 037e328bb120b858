//! Slow reference implementations for the depsim test suites.
//!
//! Nothing here shares code with `depsim`: inputs are plain vectors, strings
//! and sets so that every check compares two independent routes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Full SVD by one-sided (Hestenes) Jacobi rotations.
pub struct DenseSvd {
    /// Descending.
    pub sigma: Vec<f64>,
    /// `u[k]` is the k-th left singular vector (length rows).
    pub u: Vec<Vec<f64>>,
    /// `v[k]` is the k-th right singular vector (length cols).
    pub v: Vec<Vec<f64>>,
}

impl DenseSvd {
    /// Best rank-`d` Frobenius error, `sqrt(Σ_{k ≥ d} σ_k²)`.
    pub fn truncation_error(&self, d: usize) -> f64 {
        self.sigma[d.min(self.sigma.len())..].iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

pub fn jacobi_svd(a: &[Vec<f64>]) -> DenseSvd {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    // Work on columns.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[p][i], w[q][i]);
                    w[p][i] = c * x - s * y;
                    w[q][i] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = w
        .into_iter()
        .zip(v)
        .map(|(col, vcol)| {
            let s = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = if s > 0.0 { col.iter().map(|x| x / s).collect() } else { col };
            (s, u, vcol)
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let keep = m.min(n);
    triples.truncate(keep);
    DenseSvd {
        sigma: triples.iter().map(|t| t.0).collect(),
        u: triples.iter().map(|t| t.1.clone()).collect(),
        v: triples.into_iter().map(|t| t.2).collect(),
    }
}

pub fn random_binary(rows: usize, cols: usize, density: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| (0..cols).map(|_| f64::from(u8::from(rng.random::<f64>() < density))).collect())
        .collect()
}

fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    1.0 - dot / (nx * ny)
}

/// Average-linkage merges recomputed from scratch at every step.
///
/// Leaves are nodes `0..n`; the merge at step `s` creates node `n + s`.
/// Returns `(a, b, height)` with `a < b`, choosing the smallest
/// `(height, a, b)` each time.
pub fn naive_average_linkage(points: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut active: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let ids: Vec<usize> = active.keys().copied().collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (ia, &a) in ids.iter().enumerate() {
            for &b in &ids[ia + 1..] {
                let (la, lb) = (&active[&a], &active[&b]);
                let mut total = 0.0;
                for &x in la {
                    for &y in lb {
                        total += cosine(&points[x], &points[y]);
                    }
                }
                let h = total / (la.len() * lb.len()) as f64;
                let better = match best {
                    None => true,
                    Some((bh, ba, bb)) => (h, a, b) < (bh, ba, bb),
                };
                if better {
                    best = Some((h, a, b));
                }
            }
        }
        let (h, a, b) = best.expect("at least two active nodes");
        let mut members = active.remove(&a).unwrap();
        members.extend(active.remove(&b).unwrap());
        active.insert(n + step, members);
        merges.push((a, b, h));
    }
    merges
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    1.0 - inter / union
}

/// One snapshot of a year slice, as plain strings.
#[derive(Clone, Debug)]
pub struct PlainSnapshot {
    pub repo: String,
    pub deps: BTreeSet<String>,
}

/// Neighbor search by Jaccard distance followed by direct evaluation of
/// `idf(L)^α · Σ_{neighbors containing L} clamp(1 − dist, 0, 1)^β` with
/// smoothed idf over the slice. Full ranking by (score desc, df desc, name).
pub fn brute_force_jaccard_ranking(
    query: &BTreeSet<String>,
    exclude_repo: Option<&str>,
    slice: &[PlainSnapshot],
    k: Option<usize>,
    alpha: f64,
    beta: f64,
) -> Vec<(String, f64)> {
    let n = slice.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for s in slice {
        for d in &s.deps {
            *df.entry(d.as_str()).or_default() += 1;
        }
    }
    let mut scored: Vec<(f64, &PlainSnapshot)> = slice
        .iter()
        .filter(|s| Some(s.repo.as_str()) != exclude_repo)
        .map(|s| (jaccard(query, &s.deps), s))
        .collect();
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.repo.cmp(&y.1.repo)));
    if let Some(k) = k {
        scored.truncate(k);
    }
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (dist, s) in &scored {
        for d in &s.deps {
            if query.contains(d) {
                continue;
            }
            *sums.entry(d.as_str()).or_insert(0.0) += (1.0 - dist).clamp(0.0, 1.0).powf(beta);
        }
    }
    let mut out: Vec<(String, f64, usize)> = sums
        .into_iter()
        .map(|(lib, sum)| {
            let f = df[lib];
            let idf = ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0;
            (lib.to_string(), idf.powf(alpha) * sum, f)
        })
        .collect();
    out.sort_by(|x, y| y.1.total_cmp(&x.1).then(y.2.cmp(&x.2)).then_with(|| x.0.cmp(&y.0)));
    out.into_iter().map(|(l, s, _)| (l, s)).collect()
}

/// Precision and recall at `k` and reciprocal rank by set recounting.
pub fn recount_metrics(ranked: &[String], targets: &HashSet<String>, k: usize) -> (f64, f64, f64) {
    let top: HashSet<&String> = ranked.iter().take(k).collect();
    let hits = targets.iter().filter(|t| top.contains(t)).count() as f64;
    let rr = ranked
        .iter()
        .enumerate()
        .filter(|(_, r)| targets.contains(*r))
        .map(|(i, _)| 1.0 / (i + 1) as f64)
        .fold(0.0, f64::max);
    (hits / k as f64, hits / targets.len() as f64, rr)
}

/// Gaussian blobs around random unit directions, L2-normalized.
/// The noise standard deviation is `noise_ratio` times the smallest
/// distance between centers. Returns points and planted labels.
pub fn planted_blobs(
    n_blobs: usize,
    per_blob: usize,
    dim: usize,
    noise_ratio: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..n_blobs)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let mut sep = f64::INFINITY;
    for i in 0..n_blobs {
        for j in i + 1..n_blobs {
            let d: f64 = centers[i].iter().zip(&centers[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            sep = sep.min(d);
        }
    }
    if !sep.is_finite() {
        sep = 1.0;
    }
    let sd = noise_ratio * sep;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_blob {
        for (b, c) in centers.iter().enumerate() {
            let p: Vec<f64> = c.iter().map(|x| x + sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            points.push(p.into_iter().map(|x| x / norm).collect());
            labels.push(b);
        }
    }
    (points, labels)
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_rows * sum_cols / choose2(n);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Random `(repo, year, deps)` triples over libraries `lib0..lib{n_libs}`
/// with a skewed popularity, for property tests.
pub fn random_snapshots(
    seed: u64,
    n_repos: usize,
    n_libs: usize,
    years: &[i32],
    max_deps: usize,
) -> Vec<(String, i32, BTreeSet<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for r in 0..n_repos {
        for &y in years {
            if rng.random::<f64>() < 0.2 {
                continue;
            }
            let count = rng.random_range(1..=max_deps.max(1));
            let deps: BTreeSet<String> = (0..count)
                .map(|_| {
                    let u: f64 = rng.random();
                    // Squaring skews toward low indices, i.e. popular libraries.
                    format!("lib{}", ((u * u) * n_libs as f64) as usize)
                })
                .collect();
            out.push((format!("r{r:03}/p"), y, deps));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_on_diagonal() {
        let a = vec![vec![3.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]];
        let svd = jacobi_svd(&a);
        assert!((svd.sigma[0] - 4.0).abs() < 1e-12);
        assert!((svd.sigma[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ari_extremes() {
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]) - 1.0).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }
}
