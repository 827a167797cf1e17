use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FilterBank, WaveletCoefficients};
use crate::error::{MfdError, Result};
use crate::graph::Laplacian;

/// Largest graph the dense eigensolver accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 3000;

/// Full eigendecomposition `L = Φ Λ Φᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

pub fn eigensystem(l: &Laplacian) -> Result<EigenSystem> {
    eigensystem_with_cap(l, DEFAULT_DENSE_CAP)
}

pub fn eigensystem_with_cap(l: &Laplacian, cap: usize) -> Result<EigenSystem> {
    let n = l.dim();
    if n > cap {
        return Err(MfdError::DenseCapExceeded { n, cap });
    }
    let eig = SymmetricEigen::new(l.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

fn check_len(es: &EigenSystem, len: usize) -> Result<()> {
    if len != es.n() {
        return Err(MfdError::ShapeMismatch {
            expected: format!("signal of length {}", es.n()),
            actual: format!("length {len}"),
        });
    }
    Ok(())
}

/// Graph Fourier transform `f̂ = Φᵀ f`.
pub fn gft(es: &EigenSystem, f: &[f64]) -> Result<Vec<f64>> {
    check_len(es, f.len())?;
    Ok(es.eigenvectors.tr_mul(&DVector::from_column_slice(f)).as_slice().to_vec())
}

/// Inverse transform `f = Φ f̂`.
pub fn igft(es: &EigenSystem, fhat: &[f64]) -> Result<Vec<f64>> {
    check_len(es, fhat.len())?;
    Ok((&es.eigenvectors * DVector::from_column_slice(fhat)).as_slice().to_vec())
}

/// Wavelet transform through the eigenbasis: band `b` is `Φ diag(r_b(λ)) Φᵀ f`
/// with `r_0 = h` and `r_j = g(s_j ·)`.
pub fn forward_exact(fb: &FilterBank, es: &EigenSystem, f: &[f64]) -> Result<WaveletCoefficients> {
    let fhat = gft(es, f)?;
    let bands = (0..fb.n_bands())
        .map(|b| {
            let filtered: Vec<f64> = es
                .eigenvalues
                .iter()
                .zip(&fhat)
                .map(|(&lam, &c)| fb.response(b, lam) * c)
                .collect();
            igft(es, &filtered)
        })
        .collect::<Result<Vec<_>>>()?;
    WaveletCoefficients::from_bands(bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, WeightedGraph};
    use crate::sgw::{design_filterbank, FilterBankOptions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(n: usize) -> Laplacian {
        let w = (-0.5f64).exp();
        let e: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), w)).collect();
        laplacian(&WeightedGraph::from_edges(n, &e).unwrap())
    }

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn single_edge_system() {
        let l = laplacian(&WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap());
        let es = eigensystem(&l).unwrap();
        assert!(es.eigenvalues[0].abs() < 1e-15 && (es.eigenvalues[1] - 2.0).abs() < 1e-14);
        let c = 1.0 / 2f64.sqrt();
        assert!((es.eigenvectors[(0, 0)].abs() - c).abs() < 1e-14);
        assert!((es.eigenvectors[(1, 0)].abs() - c).abs() < 1e-14);
    }

    #[test]
    fn three_path_system() {
        let l = laplacian(&WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let es = eigensystem(&l).unwrap();
        for (a, b) in es.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_cap_enforced() {
        let l = ring(10);
        assert!(matches!(eigensystem_with_cap(&l, 5), Err(MfdError::DenseCapExceeded { n: 10, cap: 5 })));
    }

    #[test]
    fn eigensystem_invariants() {
        let es = eigensystem(&ring(60)).unwrap();
        assert!(es.eigenvalues[0].abs() < 1e-10);
        assert_eq!(es.eigenvalues.iter().filter(|&&l| l < 1e-10).count(), 1);
        let gram = es.eigenvectors.tr_mul(&es.eigenvectors);
        assert!((gram - DMatrix::identity(60, 60)).amax() < 1e-10);
    }

    #[test]
    fn gft_examples() {
        let n = 30;
        let es = eigensystem(&ring(n)).unwrap();
        let fhat = gft(&es, &vec![2.0; n]).unwrap();
        assert!((fhat[0].abs() - 2.0 * (n as f64).sqrt()).abs() < 1e-12);
        assert!(fhat[1..].iter().all(|v| v.abs() < 1e-12));
        let phi3: Vec<f64> = es.eigenvectors.column(3).iter().copied().collect();
        let unit = gft(&es, &phi3).unwrap();
        for (i, v) in unit.iter().enumerate() {
            assert!((v - if i == 3 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        assert!(gft(&es, &[1.0]).is_err());
    }

    #[test]
    fn constant_signal_lives_in_scaling_band() {
        let n = 40;
        let l = ring(n);
        let es = eigensystem(&l).unwrap();
        let fb = design_filterbank(l.lambda_max_estimate(), 5, &FilterBankOptions::default()).unwrap();
        let c = forward_exact(&fb, &es, &vec![3.0; n]).unwrap();
        for j in 0..5 {
            assert!(c.wavelet_band(j).iter().all(|v| v.abs() < 1e-12));
        }
        for v in c.scaling_band() {
            assert!((v - fb.h(0.0) * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_spectral_line() {
        let n = 40;
        let l = ring(n);
        let es = eigensystem(&l).unwrap();
        let fb = design_filterbank(l.lambda_max_estimate(), 5, &FilterBankOptions::default()).unwrap();
        let idx = 7;
        let phi: Vec<f64> = es.eigenvectors.column(idx).iter().copied().collect();
        let c = forward_exact(&fb, &es, &phi).unwrap();
        for j in 0..5 {
            let gain = fb.g(fb.scales()[j] * es.eigenvalues[idx]);
            for (a, b) in c.wavelet_band(j).iter().zip(&phi) {
                assert!((a - gain * b).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_and_band_energy_identity(n in prop::sample::select(vec![20usize, 50, 100]), seed in any::<u64>()) {
            let l = ring(n);
            let es = eigensystem(&l).unwrap();
            let fb = design_filterbank(l.lambda_max_estimate(), 5, &FilterBankOptions::default()).unwrap();
            let f = random_signal(n, seed);
            let fhat = gft(&es, &f).unwrap();
            let nf: f64 = f.iter().map(|x| x * x).sum();
            let nh: f64 = fhat.iter().map(|x| x * x).sum();
            prop_assert!((nf.sqrt() - nh.sqrt()).abs() <= 1e-10 * nf.sqrt());
            let c = forward_exact(&fb, &es, &f).unwrap();
            for (b, e) in c.energies().into_iter().enumerate() {
                let spectral: f64 = es.eigenvalues.iter().zip(&fhat)
                    .map(|(&lam, &x)| (fb.response(b, lam) * x).powi(2)).sum();
                prop_assert!((e - spectral).abs() <= 1e-10 * spectral);
            }
        }

        #[test]
        fn exact_transform_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let n = 30;
            let l = ring(n);
            let es = eigensystem(&l).unwrap();
            let fb = design_filterbank(l.lambda_max_estimate(), 4, &FilterBankOptions::default()).unwrap();
            let f = random_signal(n, seed);
            let g = random_signal(n, seed.wrapping_add(1));
            let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let (cf, cg, cm) = (forward_exact(&fb, &es, &f).unwrap(), forward_exact(&fb, &es, &g).unwrap(),
                forward_exact(&fb, &es, &mix).unwrap());
            for band in 0..fb.n_bands() {
                let scale: f64 = cm.band(band).iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for i in 0..n {
                    let lin = a * cf.band(band)[i] + b * cg.band(band)[i];
                    prop_assert!((cm.band(band)[i] - lin).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}
