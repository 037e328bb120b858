use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop when no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest squared error wins.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-4,
            n_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    pub k: usize,
    /// Cluster id of every point, in `0..k`.
    pub assignments: Vec<usize>,
    /// Mean of each cluster's members.
    pub centroids: Vec<Vec<f64>>,
    /// Total Euclidean distance from points to their centroid.
    pub inertia: f64,
    /// Total squared distance, the quantity Lloyd iterations decrease.
    pub sse: f64,
    pub iterations: usize,
}

impl ClusterPartition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Group means for a labeling with `k` groups. Empty groups get a zero vector.
pub(crate) fn group_means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

/// Sum of Euclidean distances from each point to its group mean.
pub fn within_distance(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let means = group_means(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &means[l]).sqrt())
        .sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining points coincide with a center.
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// One Lloyd run. Returns the partition and the squared error after every
/// update step.
fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng, config: &KMeansConfig) -> (ClusterPartition, Vec<f64>) {
    let mut centers = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..config.max_iter.max(1) {
        iterations += 1;
        let mut dist = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            labels[i] = c;
            dist[i] = d;
        }
        // Reseed empty clusters with the point farthest from its center.
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= number of points");
            sizes[labels[far]] -= 1;
            labels[far] = empty;
            sizes[empty] = 1;
            dist[far] = 0.0;
        }
        let new_centers = group_means(points, &labels, k);
        let shift = centers
            .iter()
            .zip(&new_centers)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = new_centers;
        history.push(points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum());
        if shift < config.tol {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]).sqrt())
        .sum();
    let sse = *history.last().expect("at least one iteration");
    (
        ClusterPartition {
            k,
            assignments: labels,
            centroids: centers,
            inertia,
            sse,
            iterations,
        },
        history,
    )
}

fn check(points: &[Vec<f64>], k: usize) -> Result<(), ClusterError> {
    if k == 0 || points.len() < k {
        return Err(ClusterError::TooFewPoints { k, n: points.len() });
    }
    Ok(())
}

/// k-means++ seeded Lloyd iterations, best of `config.n_init` restarts.
/// Deterministic for a given seed.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, config: &KMeansConfig) -> Result<ClusterPartition, ClusterError> {
    check(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterPartition> = None;
    for _ in 0..config.n_init.max(1) {
        let (run, _) = lloyd(points, k, &mut rng, config);
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

/// A single run with its per-iteration squared error, for diagnostics.
pub fn kmeans_trace(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<(ClusterPartition, Vec<f64>), ClusterError> {
    check(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lloyd(points, k, &mut rng, config))
}
