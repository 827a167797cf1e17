//! Checks of the band-energy bounds, energy profiles and experiment
//! harnesses.

mod spectrum;
mod sweep;
mod tangent;
mod theory;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use spectrum::{band_energy_profile, write_profiles_csv, EnergyProfile};
pub use sweep::{k_sweep, write_sweep_csv, SweepRow};
pub use tangent::{
    best_over_k, local_pca_normals, local_pca_tangent_error, sphere_normals, sphere_tangent_row, TangentRow,
    TABLE1_K_VALUES, TABLE1_POINTS, TABLE1_RADIUS,
};
pub use theory::{
    check_lemma1, check_lemma2, check_lemma3, check_theorem1, check_theorem2, compute_cs, estimate_covering_radius,
    laplacian_form, scale_trend, Lemma3Report, ManifoldMeta, NoiseRecord, NoisyDimension, NoisyScaleBound,
    NoisySystem, ScaleBound, Theorem2Report, VariationCheck, NOISE_SPREAD_FLAG, ZERO_EIGENVALUE_TOL,
};

use crate::error::{MfdError, Result};
use crate::graph::{build_knn_graph, laplacian, SigmaMode};
use crate::pointcloud::{format_f64, PointCloud};
use crate::sgw::{design_filterbank, eigensystem, FilterBankOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryConfig {
    pub k: usize,
    pub sigma_mode: SigmaMode,
    pub j_scales: usize,
    pub filter: FilterBankOptions,
    /// Reach of the manifold.
    pub tau: f64,
    pub c_const: f64,
    /// `None` uses the sample resolution of the clean cloud.
    pub covering_radius: Option<f64>,
    /// Shift every coordinate by twice the diameter so that no signal has
    /// zero mean.
    pub translate: bool,
    /// Noise variance for the Monte Carlo check; skipped when `trials` is 0.
    pub mc_variance: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            k: 10,
            sigma_mode: SigmaMode::Auto,
            j_scales: 5,
            filter: FilterBankOptions::default(),
            tau: 1.0,
            c_const: 1.0,
            covering_radius: None,
            translate: true,
            mc_variance: 0.1,
            trials: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDimension {
    pub dimension: usize,
    pub laplacian_form_value: f64,
    pub c_f: f64,
    pub variation: VariationCheck,
    pub scales: Vec<ScaleBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub config: TheoryConfig,
    pub meta: ManifoldMeta,
    pub sampling_ratio: f64,
    pub sampling_condition_holds: bool,
    pub translation_offset: f64,
    pub lambda_max: f64,
    pub scales: Vec<f64>,
    pub lemma1_violations: usize,
    pub clean: Vec<CleanDimension>,
    /// `s·C_s` per scale on the clean spectrum.
    pub scale_trend: Vec<f64>,
    pub noise: Option<Lemma3Report>,
    /// Present when the input carries ground truth that differs from it.
    pub noisy: Option<Theorem2Report>,
}

impl TheoryReport {
    /// Every deterministic bound holds.
    pub fn all_bounds_satisfied(&self) -> bool {
        self.clean
            .iter()
            .all(|d| d.variation.satisfied && d.scales.iter().all(|s| s.satisfied))
            && self.noisy.as_ref().is_none_or(|n| n.all_satisfied())
    }
}

/// Runs every check on `cloud`. The clean checks use the ground truth when
/// present, otherwise the coordinates themselves.
pub fn theory_report(cloud: &PointCloud, cfg: &TheoryConfig) -> Result<TheoryReport> {
    if cloud.n_points() < 2 {
        return Err(MfdError::param("n", "need at least 2 points"));
    }
    let clean0 = cloud.truth_cloud().unwrap_or_else(|| cloud.clone());
    let offset = if cfg.translate { 2.0 * clean0.diameter() } else { 0.0 };
    let clean = clean0.translated(offset);
    let covering_radius = match cfg.covering_radius {
        Some(t) => t,
        None => estimate_covering_radius(&clean)?,
    };
    let meta = ManifoldMeta::new(cfg.tau, covering_radius, cfg.c_const)?;
    if !meta.sampling_condition_holds() {
        log::warn!("T/tau = {:.4} is not below 1/4", meta.sampling_ratio());
    }

    let g = build_knn_graph(&clean, cfg.k, cfg.sigma_mode)?;
    let l = laplacian(&g);
    let es = eigensystem(&l)?;
    let fb = design_filterbank(l.lambda_max_estimate(), cfg.j_scales, &cfg.filter)?;
    let dims = (0..clean.ambient_dim())
        .map(|r| {
            let f = clean.signal(r);
            let variation = check_lemma2(&l, &f, &meta)?;
            Ok(CleanDimension {
                dimension: r,
                laplacian_form_value: variation.laplacian_form,
                c_f: variation.c_f,
                scales: check_theorem1(&fb, &es, &f, &meta)?,
                variation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let noise = if cfg.trials > 0 {
        Some(check_lemma3(&fb, &es, cfg.mc_variance, cfg.trials, cfg.seed)?)
    } else {
        None
    };
    let noisy = match cloud.ground_truth() {
        Some(t) if t != cloud.coords() => {
            let shifted = cloud.translated(offset);
            let sys = NoisySystem::build(&shifted, cfg.k, cfg.sigma_mode)?;
            let nfb = design_filterbank(sys.noisy_laplacian.lambda_max_estimate(), cfg.j_scales, &cfg.filter)?;
            Some(check_theorem2(&nfb, &sys, &meta)?)
        }
        _ => None,
    };
    Ok(TheoryReport {
        config: cfg.clone(),
        sampling_ratio: meta.sampling_ratio(),
        sampling_condition_holds: meta.sampling_condition_holds(),
        meta,
        translation_offset: offset,
        lambda_max: fb.lambda_max(),
        scales: fb.scales().to_vec(),
        lemma1_violations: check_lemma1(&clean, &g, &meta),
        clean: dims,
        scale_trend: scale_trend(&fb, &es.eigenvalues)?,
        noise,
        noisy,
    })
}

/// CSV `scale,empirical,bound,satisfied`.
pub fn write_scale_bounds_csv(rows: &[ScaleBound], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "scale,empirical,bound,satisfied")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            format_f64(r.scale),
            format_f64(r.empirical_energy),
            format_f64(r.bound),
            r.satisfied
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::{add_gaussian_noise, sample_manifold, ManifoldKind, ShapeParams};

    #[test]
    fn report_on_clean_circle() {
        let pc = sample_manifold(ManifoldKind::Circle, 400, &ShapeParams::default(), 3).unwrap();
        let rep = theory_report(&pc, &TheoryConfig::default()).unwrap();
        assert!(rep.noisy.is_none() && rep.noise.is_none());
        assert_eq!(rep.clean.len(), 2);
        assert!(rep.translation_offset > 3.9);
        assert_eq!(rep.lemma1_violations, 0);
        assert!(rep.all_bounds_satisfied());
        let json = serde_json::to_string(&rep).unwrap();
        let back: TheoryReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.clean.len(), 2);
    }

    #[test]
    fn report_on_noisy_circle() {
        let pc = sample_manifold(ManifoldKind::Circle, 300, &ShapeParams::default(), 3).unwrap();
        let noisy = add_gaussian_noise(&pc, 0.01, 4).unwrap();
        let cfg = TheoryConfig {
            trials: 30,
            ..TheoryConfig::default()
        };
        let rep = theory_report(&noisy, &cfg).unwrap();
        assert!(rep.noisy.is_some());
        assert_eq!(rep.noise.as_ref().unwrap().scales.len(), 5);
    }

    #[test]
    fn zero_mean_without_translation_errors() {
        let coords = nalgebra::DMatrix::from_row_slice(4, 1, &[-1.5, -0.5, 0.5, 1.5]);
        let pc = PointCloud::new(coords).unwrap();
        let cfg = TheoryConfig {
            k: 1,
            translate: false,
            ..TheoryConfig::default()
        };
        assert!(matches!(theory_report(&pc, &cfg), Err(MfdError::ZeroMeanSignal)));
    }

    #[test]
    fn scale_bounds_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let row = ScaleBound {
            scale: 1.0,
            empirical_energy: 0.5,
            bound: 2.0,
            c_s: 1.0,
            satisfied: true,
        };
        write_scale_bounds_csv(&[row], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("scale,empirical,bound,satisfied\n"));
        assert!(text.trim_end().ends_with(",true"));
    }
}
