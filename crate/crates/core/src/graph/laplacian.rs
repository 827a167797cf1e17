use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CsrMatrix, WeightedGraph};

/// Largest Krylov dimension used by [`estimate_lambda_max`].
pub const LANCZOS_MAX_STEPS: usize = 150;
/// Relative residual at which the top Ritz value counts as converged.
pub const LANCZOS_TOL: f64 = 1e-10;
/// Inflation applied to the converged estimate so it bounds `λ_N` from above.
pub const SAFETY_FACTOR: f64 = 1.01;

/// Combinatorial Laplacian `L = D − W` in sparse form.
#[derive(Debug, Clone)]
pub struct Laplacian {
    matrix: CsrMatrix,
    degrees: Vec<f64>,
    lambda_max_estimate: f64,
    lambda_n: f64,
}

pub fn laplacian(g: &WeightedGraph) -> Laplacian {
    let n = g.n_vertices();
    let mut degrees = Vec::with_capacity(n);
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = g.neighbors(i).map(|(j, w)| (j, -w)).collect();
            let d: f64 = g.neighbors(i).map(|(_, w)| w).sum();
            degrees.push(d);
            row.push((i, d));
            row
        })
        .collect();
    let mut l = Laplacian {
        matrix: CsrMatrix::from_rows(rows),
        degrees,
        lambda_max_estimate: 0.0,
        lambda_n: 0.0,
    };
    l.lambda_n = top_eigenvalue(&l);
    let gershgorin = 2.0 * l.max_degree();
    l.lambda_max_estimate = (l.lambda_n * SAFETY_FACTOR).min(gershgorin);
    l
}

impl Laplacian {
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().cloned().fold(0.0, f64::max)
    }

    /// Upper bound on the largest eigenvalue, fixed at construction.
    pub fn lambda_max_estimate(&self) -> f64 {
        self.lambda_max_estimate
    }

    /// Largest eigenvalue to Lanczos accuracy (no safety margin).
    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.mul_vec_into(x, y);
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// `fᵀ L f`.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        self.apply(f).iter().zip(f).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// Upper bound on `λ_N` for the Chebyshev interval: [`top_eigenvalue`]
/// inflated by [`SAFETY_FACTOR`] and capped by the Gershgorin bound
/// `2·d_max`, which is also the fallback when Lanczos does not converge.
pub fn estimate_lambda_max(l: &Laplacian) -> f64 {
    let gershgorin = 2.0 * l.max_degree();
    lanczos_top(l).map_or(gershgorin, |t| (t * SAFETY_FACTOR).min(gershgorin))
}

/// `λ_N` to Lanczos accuracy (largest Ritz value plus its residual bound),
/// or `2·d_max` if the iteration does not converge.
pub fn top_eigenvalue(l: &Laplacian) -> f64 {
    lanczos_top(l).unwrap_or(2.0 * l.max_degree())
}

/// Lanczos with full reorthogonalisation from a fixed random start.
fn lanczos_top(l: &Laplacian) -> Option<f64> {
    let n = l.dim();
    if n == 0 || l.max_degree() == 0.0 {
        return Some(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a_2b_3c);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; n];
    for step in 0..LANCZOS_MAX_STEPS.min(n) {
        l.apply_into(&v, &mut w);
        let a = dot(&v, &w);
        alphas.push(a);
        basis.push(v.clone());
        // full reorthogonalisation, twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = normalize(&mut w);
        let (theta, resid) = top_ritz(&alphas, &betas, b);
        let exhausted = b <= LANCZOS_TOL * theta.abs() || step + 1 == n;
        if exhausted || resid <= LANCZOS_TOL * theta.abs() {
            return Some(theta + resid);
        }
        betas.push(b);
        std::mem::swap(&mut v, &mut w);
    }
    None
}

/// Largest eigenvalue of the Lanczos tridiagonal and its residual bound
/// `β_k |y_k|`.
fn top_ritz(alphas: &[f64], betas: &[f64], next_beta: f64) -> (f64, f64) {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let (idx, theta) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty tridiagonal");
    (theta, next_beta * eig.eigenvectors[(k - 1, idx)].abs())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}
