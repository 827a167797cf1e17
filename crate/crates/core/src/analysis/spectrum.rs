//! Band energy profiles of wavelet coefficients.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pointcloud::format_f64;
use crate::sgw::WaveletCoefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub energies: Vec<f64>,
    /// Energies over their total; all zero when `all_zero` is set.
    pub fractions: Vec<f64>,
    pub all_zero: bool,
}

impl EnergyProfile {
    /// Fraction carried by the scaling band and the first `j` wavelet bands.
    pub fn prefix_fraction(&self, j: usize) -> f64 {
        self.fractions.iter().take(j + 1).sum()
    }
}

pub fn band_energy_profile(coeffs: &WaveletCoefficients) -> EnergyProfile {
    let energies = coeffs.energies();
    let total: f64 = energies.iter().sum();
    if total == 0.0 {
        return EnergyProfile {
            fractions: vec![0.0; energies.len()],
            energies,
            all_zero: true,
        };
    }
    EnergyProfile {
        fractions: energies.iter().map(|e| e / total).collect(),
        energies,
        all_zero: false,
    }
}

/// Writes `dimension,band,scale,energy,fraction`, one row per band of each
/// profile. The scaling band has an empty scale cell.
pub fn write_profiles_csv(profiles: &[EnergyProfile], scales: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "dimension,band,scale,energy,fraction")?;
    for (d, p) in profiles.iter().enumerate() {
        for (b, (e, f)) in p.energies.iter().zip(&p.fractions).enumerate() {
            let scale = if b == 0 { String::new() } else { format_f64(scales[b - 1]) };
            writeln!(out, "{d},{b},{scale},{},{}", format_f64(*e), format_f64(*f))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_knn_graph, laplacian, SigmaMode, WeightedGraph};
    use crate::pointcloud::{sample_manifold, ManifoldKind, ShapeParams};
    use crate::sgw::{design_filterbank, eigensystem, forward_exact, FilterBankOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn fractions_sum_to_one() {
        let c = WaveletCoefficients::from_bands(vec![vec![1.0, 2.0], vec![0.5, 0.0], vec![0.1, 0.3]]).unwrap();
        let p = band_energy_profile(&c);
        assert!(!p.all_zero);
        assert!((p.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_are_flagged() {
        let p = band_energy_profile(&WaveletCoefficients::zeros(4, 3));
        assert!(p.all_zero);
        assert_eq!(p.fractions, vec![0.0; 4]);
    }

    #[test]
    fn constant_signal_sits_in_scaling_band() {
        let n = 30;
        let w = (-0.5f64).exp();
        let e: Vec<_> = (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), w)).collect();
        let l = laplacian(&WeightedGraph::from_edges(n, &e).unwrap());
        let es = eigensystem(&l).unwrap();
        let fb = design_filterbank(l.lambda_max_estimate(), 5, &FilterBankOptions::default()).unwrap();
        let p = band_energy_profile(&forward_exact(&fb, &es, &vec![2.0; n]).unwrap());
        assert!((p.fractions[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_spreads_over_bands() {
        let pc = sample_manifold(ManifoldKind::Circle, 300, &ShapeParams::default(), 2).unwrap();
        let l = laplacian(&build_knn_graph(&pc, 10, SigmaMode::Auto).unwrap());
        let es = eigensystem(&l).unwrap();
        let fb = design_filterbank(l.lambda_max_estimate(), 5, &FilterBankOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p = band_energy_profile(&forward_exact(&fb, &es, &f).unwrap());
            assert!(p.fractions.iter().all(|&x| x <= 0.9), "{:?}", p.fractions);
        }
    }

    #[test]
    fn profile_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = band_energy_profile(&WaveletCoefficients::from_bands(vec![vec![1.0], vec![1.0]]).unwrap());
        write_profiles_csv(&[p.clone(), p], &[2.0], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,,"));
        assert!(lines[2].starts_with("0,1,2.0"));
    }
}
