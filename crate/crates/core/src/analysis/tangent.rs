//! Local-PCA normal estimation and its angular error against known normals.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{mfd_denoise, DenoiseConfig};
use crate::error::{MfdError, Result};
use crate::graph::NeighborIndex;
use crate::pointcloud::{add_gaussian_noise, sample_manifold, ManifoldKind, PointCloud, ShapeParams};

/// Neighbourhood sizes searched by [`best_over_k`] in the sphere experiment.
pub const TABLE1_K_VALUES: [usize; 7] = [20, 30, 40, 50, 60, 70, 80];
/// Sphere radius of the sphere experiment.
pub const TABLE1_RADIUS: f64 = 3.0;
pub const TABLE1_POINTS: usize = 1000;

/// Unit normal per point: smallest-eigenvalue eigenvector of the centred
/// covariance of the point and its `k` nearest neighbours.
pub fn local_pca_normals(pc: &PointCloud, k: usize) -> Result<DMatrix<f64>> {
    let (n, d) = (pc.n_points(), pc.ambient_dim());
    if k < d {
        return Err(MfdError::param("k", format!("must be at least the ambient dimension {d}, got {k}")));
    }
    if k >= n {
        return Err(MfdError::param("k", format!("must be below the point count {n}, got {k}")));
    }
    let x = pc.coords();
    let index = NeighborIndex::new(x);
    let normals: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut members = vec![i];
            members.extend(index.knn_of(i, k).iter().map(|nb| nb.index));
            let m = members.len() as f64;
            let mean: Vec<f64> = (0..d).map(|c| members.iter().map(|&p| x[(p, c)]).sum::<f64>() / m).collect();
            let mut cov = DMatrix::zeros(d, d);
            for &p in &members {
                for a in 0..d {
                    let da = x[(p, a)] - mean[a];
                    for b in a..d {
                        cov[(a, b)] += da * (x[(p, b)] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[(a, b)] = cov[(b, a)];
                }
            }
            let eig = SymmetricEigen::new(cov);
            let min = eig.eigenvalues.argmin().0;
            eig.eigenvectors.column(min).iter().copied().collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, d, |i, c| normals[i][c]))
}

/// Mean of `arccos |⟨n̂_i, n_i⟩|` in degrees; rows of `truth_normals` are
/// normalised first.
pub fn local_pca_tangent_error(pc: &PointCloud, truth_normals: &DMatrix<f64>, k: usize) -> Result<f64> {
    if truth_normals.shape() != pc.coords().shape() {
        return Err(MfdError::ShapeMismatch {
            expected: format!("{}x{} normals", pc.n_points(), pc.ambient_dim()),
            actual: format!("{}x{}", truth_normals.nrows(), truth_normals.ncols()),
        });
    }
    let est = local_pca_normals(pc, k)?;
    let total: f64 = (0..pc.n_points())
        .map(|i| {
            let t = truth_normals.row(i);
            let cos = est.row(i).dot(&t).abs() / t.norm();
            cos.min(1.0).acos().to_degrees()
        })
        .sum();
    Ok(total / pc.n_points() as f64)
}

/// Smallest error over `k_values`, with the `k` that achieved it.
pub fn best_over_k(pc: &PointCloud, truth_normals: &DMatrix<f64>, k_values: &[usize]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &k in k_values {
        let e = local_pca_tangent_error(pc, truth_normals, k)?;
        if best.is_none_or(|(_, b)| e < b) {
            best = Some((k, e));
        }
    }
    best.ok_or_else(|| MfdError::param("k_values", "must not be empty"))
}

/// Outward unit normals of a sphere centred at the origin.
pub fn sphere_normals(points: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = points.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentRow {
    /// Noise standard deviation per coordinate.
    pub sigma: f64,
    pub before: f64,
    pub best_k_before: usize,
    /// `None` at `sigma = 0`, where nothing is denoised.
    pub after: Option<f64>,
    pub best_k_after: Option<usize>,
}

/// One column of the sphere experiment: `TABLE1_POINTS` area-uniform points
/// on a sphere of radius `TABLE1_RADIUS`, Gaussian noise of standard
/// deviation `sigma`, local-PCA error before and after denoising with `cfg`.
pub fn sphere_tangent_row(sigma: f64, seed: u64, cfg: &DenoiseConfig) -> Result<TangentRow> {
    let params = ShapeParams {
        radius: TABLE1_RADIUS,
        ..ShapeParams::default()
    };
    let clean = sample_manifold(ManifoldKind::Sphere, TABLE1_POINTS, &params, seed)?;
    let normals = sphere_normals(clean.coords());
    let noisy = add_gaussian_noise(&clean, sigma * sigma, seed.wrapping_add(1))?;
    let (best_k_before, before) = best_over_k(&noisy, &normals, &TABLE1_K_VALUES)?;
    if sigma == 0.0 {
        return Ok(TangentRow {
            sigma,
            before,
            best_k_before,
            after: None,
            best_k_after: None,
        });
    }
    let denoised = mfd_denoise(&noisy, cfg)?.cloud;
    let (k_after, after) = best_over_k(&denoised, &normals, &TABLE1_K_VALUES)?;
    Ok(TangentRow {
        sigma,
        before,
        best_k_before,
        after: Some(after),
        best_k_after: Some(k_after),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plane_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coords = DMatrix::from_fn(200, 3, |_, c| if c == 2 { 0.7 } else { rng.random_range(-1.0..1.0) });
        let pc = PointCloud::new(coords).unwrap();
        let normals = DMatrix::from_fn(200, 3, |_, c| if c == 2 { 1.0 } else { 0.0 });
        assert!(local_pca_tangent_error(&pc, &normals, 10).unwrap() < 1e-6);
    }

    #[test]
    fn rejects_small_k_and_bad_shapes() {
        let pc = sample_manifold(ManifoldKind::Sphere, 50, &ShapeParams::default(), 1).unwrap();
        let normals = sphere_normals(pc.coords());
        assert!(local_pca_tangent_error(&pc, &normals, 2).is_err());
        assert!(local_pca_tangent_error(&pc, &normals, 50).is_err());
        assert!(local_pca_tangent_error(&pc, &normals.columns(0, 2).into_owned(), 5).is_err());
        assert!(best_over_k(&pc, &normals, &[]).is_err());
    }

    #[test]
    fn noiseless_sphere_error_is_small() {
        let params = ShapeParams {
            radius: TABLE1_RADIUS,
            ..ShapeParams::default()
        };
        let pc = sample_manifold(ManifoldKind::Sphere, TABLE1_POINTS, &params, 0).unwrap();
        let (k, e) = best_over_k(&pc, &sphere_normals(pc.coords()), &TABLE1_K_VALUES).unwrap();
        assert!(TABLE1_K_VALUES.contains(&k));
        assert!(e > 0.6 && e < 2.6, "{e}");
    }

    #[test]
    fn error_grows_with_noise() {
        let a = sphere_tangent_row(0.05, 4, &DenoiseConfig::default()).unwrap();
        let b = sphere_tangent_row(0.2, 4, &DenoiseConfig::default()).unwrap();
        assert!(a.before < b.before);
        assert!(a.after.unwrap().is_finite() && b.after.unwrap().is_finite());
        assert!(sphere_tangent_row(0.0, 4, &DenoiseConfig::default()).unwrap().after.is_none());
    }
}
