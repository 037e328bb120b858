use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::embed::cosine_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two joined node ids.
    pub a: usize,
    pub b: usize,
    pub height: f64,
    /// Id of the new node: `leaves + step`.
    pub node: usize,
    /// Number of leaves under the new node.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    /// Leaves are nodes `0..leaves`, one per input item.
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomeration under cosine distance.
///
/// The linkage between two nodes is the mean cosine distance over all pairs
/// of their leaves. Equal linkages are resolved by the smallest `(a, b)`.
pub fn agglomerate(points: &[Vec<f64>]) -> Result<Dendrogram, ClusterError> {
    let n = points.len();
    if n < 2 {
        return Err(ClusterError::TooFewItems(n));
    }
    for (i, p) in points.iter().enumerate() {
        if p.iter().all(|&x| x == 0.0) {
            return Err(ClusterError::ZeroVector(i));
        }
    }
    // Pairwise distance sums between active nodes, indexed by slot.
    let mut sum = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&points[i], &points[j]).map_err(|_| ClusterError::ZeroVector(i))?;
            sum[i][j] = d;
            sum[j][i] = d;
        }
    }
    let mut id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (x, &s) in active.iter().enumerate() {
            for &t in &active[x + 1..] {
                let h = sum[s][t] / (size[s] * size[t]) as f64;
                let (a, b) = (id[s].min(id[t]), id[s].max(id[t]));
                let better = best.is_none_or(|(bh, ba, bb, _, _)| (h, a, b) < (bh, ba, bb));
                if better {
                    best = Some((h, a, b, s, t));
                }
            }
        }
        let (height, a, b, s, t) = best.expect("two active nodes");
        for &u in &active {
            if u != s && u != t {
                let v = sum[s][u] + sum[t][u];
                sum[s][u] = v;
                sum[u][s] = v;
            }
        }
        size[s] += size[t];
        id[s] = n + step;
        active.retain(|&u| u != t);
        merges.push(Merge {
            a,
            b,
            height,
            node: n + step,
            size: size[s],
        });
    }
    Ok(Dendrogram { leaves: n, merges })
}

impl Dendrogram {
    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    fn height_of(&self, node: usize) -> f64 {
        if node < self.leaves {
            0.0
        } else {
            self.merges[node - self.leaves].height
        }
    }

    /// Newick text with branch lengths. Leaves are named by `label`.
    pub fn to_newick_with<F: Fn(usize) -> String>(&self, label: F) -> String {
        fn walk<F: Fn(usize) -> String>(d: &Dendrogram, node: usize, label: &F, out: &mut String) {
            if node < d.leaves {
                out.push_str(&label(node));
                return;
            }
            let m = &d.merges[node - d.leaves];
            out.push('(');
            for (i, child) in [m.a, m.b].into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                walk(d, child, label, out);
                let _ = write!(out, ":{}", m.height - d.height_of(child));
            }
            out.push(')');
        }
        let mut out = String::new();
        let root = if self.leaves == 1 { 0 } else { self.leaves + self.merges.len() - 1 };
        walk(self, root, &label, &mut out);
        out.push(';');
        out
    }

    /// Newick text with leaves named by their cluster id.
    pub fn to_newick(&self) -> String {
        self.to_newick_with(|i| i.to_string())
    }
}
