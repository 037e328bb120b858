//! Randomized truncated SVD of a sparse binary matrix.
//!
//! Range finding follows the usual Gaussian sketch + subspace iteration
//! scheme. After the fixed number of power iterations the subspace keeps
//! iterating until the leading `d` singular triplets have a small residual,
//! so the result agrees with a dense decomposition to near machine precision
//! instead of to sketch accuracy.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::EmbedError;
use crate::linalg::BinaryCsr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdConfig {
    pub oversampling: usize,
    pub power_iterations: usize,
    /// Extra subspace iterations allowed while waiting for convergence.
    pub max_refinements: usize,
    /// Stop once every `‖A·v_j − σ_j·u_j‖` is below `tolerance · σ_1`.
    pub tolerance: f64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            oversampling: 10,
            power_iterations: 4,
            max_refinements: 300,
            tolerance: 1e-10,
        }
    }
}

/// `A ≈ U · diag(sigma) · Vᵀ` with `d` components.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// rows × d
    pub u: DMatrix<f64>,
    /// Descending, nonnegative.
    pub sigma: Vec<f64>,
    /// cols × d
    pub v: DMatrix<f64>,
    /// Subspace iterations actually run.
    pub iterations: usize,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `‖A − U·diag(σ)·Vᵀ‖_F`, computed without forming the dense product.
    pub fn reconstruction_error(&self, a: &BinaryCsr) -> f64 {
        let d = self.rank();
        let av = a.mul_dense(&self.v);
        let cross = self.u.transpose() * av;
        let gu = self.u.transpose() * &self.u;
        let gv = self.v.transpose() * &self.v;
        let mut err2 = a.frobenius_sq();
        for i in 0..d {
            err2 -= 2.0 * self.sigma[i] * cross[(i, i)];
            for j in 0..d {
                err2 += self.sigma[i] * self.sigma[j] * gu[(i, j)] * gv[(i, j)];
            }
        }
        err2.max(0.0).sqrt()
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Rayleigh–Ritz step: given an orthonormal basis `q` of the left subspace
/// and `z = Aᵀ·q`, extract the leading `d` singular triplets.
fn extract(q: &DMatrix<f64>, z: &DMatrix<f64>, d: usize) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    // Bᵀ = z = W·S·Xᵀ  ⇒  B = Qᵀ·A = X·S·Wᵀ, so V = W and U = Q·X.
    let svd = z.clone().svd(true, true);
    let w = svd.u.expect("left vectors requested");
    let x = svd.v_t.expect("right vectors requested").transpose();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(d);

    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    let mut v = w.select_columns(&order);
    let mut u = q * x.select_columns(&order);

    // Make the largest-magnitude entry of each V column nonnegative.
    for c in 0..d {
        let mut best = 0;
        for r in 0..v.nrows() {
            if v[(r, c)].abs() > v[(best, c)].abs() {
                best = r;
            }
        }
        if v[(best, c)] < 0.0 {
            v.column_mut(c).neg_mut();
            u.column_mut(c).neg_mut();
        }
    }
    (u, sigma, v)
}

/// Largest `‖A·v_j − σ_j·u_j‖`. The left residual `Aᵀ·u_j − σ_j·v_j` is zero
/// by construction of [`extract`].
fn residual(a: &BinaryCsr, u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> f64 {
    let av = a.mul_dense(v);
    (0..sigma.len())
        .map(|j| (av.column(j) - u.column(j) * sigma[j]).norm())
        .fold(0.0, f64::max)
}

pub fn truncated_svd(a: &BinaryCsr, d: usize, seed: u64) -> Result<SvdFactors, EmbedError> {
    truncated_svd_with(a, d, seed, &SvdConfig::default())
}

pub fn truncated_svd_with(
    a: &BinaryCsr,
    d: usize,
    seed: u64,
    config: &SvdConfig,
) -> Result<SvdFactors, EmbedError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Err(EmbedError::EmptyMatrix);
    }
    let max_rank = m.min(n);
    if d == 0 || d > max_rank {
        return Err(EmbedError::RankTooLarge { d, max: max_rank });
    }
    let width = (d + config.oversampling).min(max_rank);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(n, width, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormalize(a.mul_dense(&omega));

    let mut iterations = 0;
    loop {
        let z = a.tr_mul_dense(&q);
        if iterations >= config.power_iterations {
            let (u, sigma, v) = extract(&q, &z, d);
            let scale = sigma[0].max(f64::MIN_POSITIVE);
            let exhausted = iterations >= config.power_iterations + config.max_refinements;
            if exhausted || residual(a, &u, &sigma, &v) <= config.tolerance * scale {
                return Ok(SvdFactors {
                    u,
                    sigma,
                    v,
                    iterations,
                });
            }
        }
        q = orthonormalize(a.mul_dense(&orthonormalize(z)));
        iterations += 1;
    }
}
