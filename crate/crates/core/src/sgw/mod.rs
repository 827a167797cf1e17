//! Spectral graph wavelet frame: kernel design, the dense reference
//! transform, the Chebyshev fast transform and frame inversion.

mod chebyshev;
mod exact;
mod filterbank;

use std::io::Write;
use std::path::Path;

pub use chebyshev::{
    chebyshev_coefficients, forward_chebyshev, forward_chebyshev_block, inverse, ChebyshevBank, ChebyshevSeries,
    Reconstruction, CG_MAX_ITER, SUP_ERROR_GRID,
};
pub use exact::{eigensystem, eigensystem_with_cap, forward_exact, gft, igft, EigenSystem, DEFAULT_DENSE_CAP};
pub use filterbank::{design_filterbank, FilterBank, FilterBankOptions, KernelParams, ScalingParams};

use crate::error::{MfdError, Result};
use crate::pointcloud::format_f64;

/// One scaling band followed by `J` wavelet bands, each of length `N`.
/// Band `j ≥ 1` belongs to scale `scales()[j − 1]` of the filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoefficients {
    bands: Vec<Vec<f64>>,
}

impl WaveletCoefficients {
    pub fn from_bands(bands: Vec<Vec<f64>>) -> Result<Self> {
        if bands.len() < 2 {
            return Err(MfdError::param("bands", "need a scaling band and at least one wavelet band"));
        }
        let n = bands[0].len();
        if let Some(b) = bands.iter().find(|b| b.len() != n) {
            return Err(MfdError::ShapeMismatch {
                expected: format!("bands of length {n}"),
                actual: format!("band of length {}", b.len()),
            });
        }
        if bands.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MfdError::param("bands", "coefficients must be finite"));
        }
        Ok(Self { bands })
    }

    pub fn zeros(n: usize, j_count: usize) -> Self {
        Self {
            bands: vec![vec![0.0; n]; j_count + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.bands[0].len()
    }

    pub fn j_count(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn scaling_band(&self) -> &[f64] {
        &self.bands[0]
    }

    /// Wavelet band for scale index `j` (0-based, coarsest first).
    pub fn wavelet_band(&self, j: usize) -> &[f64] {
        &self.bands[j + 1]
    }

    /// Band by overall index, 0 being the scaling band.
    pub fn band(&self, b: usize) -> &[f64] {
        &self.bands[b]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f64] {
        &mut self.bands[b]
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    /// `Σ_n Ψ(b, n)²` per band.
    pub fn energies(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.iter().map(|v| v * v).sum()).collect()
    }

    /// Writes the coefficients as CSV `band,vertex,value`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "band,vertex,value")?;
        for (b, band) in self.bands.iter().enumerate() {
            for (v, x) in band.iter().enumerate() {
                writeln!(out, "{b},{v},{}", format_f64(*x))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
