//! Denoising RMSE as a function of the neighbourhood size.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::{mfd_denoise, DenoiseConfig};
use crate::error::{MfdError, Result};
use crate::pointcloud::{format_f64, rmse_matrix, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub rmse: f64,
}

/// Denoises `noisy` once per `k` (other settings from `template`) and scores
/// each result against the cloud's ground truth. Rows follow `k_values`.
pub fn k_sweep(noisy: &PointCloud, k_values: &[usize], template: &DenoiseConfig) -> Result<Vec<SweepRow>> {
    let truth = noisy.ground_truth().ok_or(MfdError::MissingGroundTruth)?;
    k_values
        .par_iter()
        .map(|&k| {
            let cfg = DenoiseConfig {
                k,
                ..template.clone()
            };
            let out = mfd_denoise(noisy, &cfg)?;
            Ok(SweepRow {
                k,
                rmse: rmse_matrix(out.cloud.coords(), truth)?,
            })
        })
        .collect()
}

/// CSV `k,rmse`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "k,rmse")?;
    for r in rows {
        writeln!(out, "{},{}", r.k, format_f64(r.rmse))?;
    }
    out.flush()?;
    Ok(())
}
