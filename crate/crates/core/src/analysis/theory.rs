//! Numerical checks of the spectral-decay bounds for coordinate signals,
//! clean and noisy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfdError, Result};
use crate::graph::{build_knn_graph, laplacian, two_hop_max_degree, Laplacian, NeighborIndex, SigmaMode, WeightedGraph};
use crate::pointcloud::PointCloud;
use crate::sgw::{eigensystem, forward_exact, gft, EigenSystem, FilterBank};

/// Eigenvalues below this are treated as the zero eigenvalue.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;
/// `max_i ‖ξ_i‖` above this multiple of `q(ξ)/2` flags the noise bound as
/// unrepresentative.
pub const NOISE_SPREAD_FLAG: f64 = 10.0;

/// Geometry constants entering the bounds: reach `τ`, covering radius `T`,
/// the constant `C ≥ 1`, and `Δ = 4CT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldMeta {
    pub tau: f64,
    pub covering_radius: f64,
    pub c_const: f64,
    pub delta: f64,
}

impl ManifoldMeta {
    pub fn new(tau: f64, covering_radius: f64, c_const: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(MfdError::param("tau", format!("must be positive, got {tau}")));
        }
        if !(covering_radius > 0.0 && covering_radius.is_finite()) {
            return Err(MfdError::param("covering_radius", format!("must be positive, got {covering_radius}")));
        }
        if !(c_const >= 1.0 && c_const.is_finite()) {
            return Err(MfdError::param("c_const", format!("must be at least 1, got {c_const}")));
        }
        Ok(Self {
            tau,
            covering_radius,
            c_const,
            delta: 4.0 * c_const * covering_radius,
        })
    }

    /// `T/τ`; the smoothness lemma assumes it is below 1/4.
    pub fn sampling_ratio(&self) -> f64 {
        self.covering_radius / self.tau
    }

    pub fn sampling_condition_holds(&self) -> bool {
        self.sampling_ratio() < 0.25
    }

    /// `4C²T²/τ`, the noise floor inside `q(ξ)`.
    pub fn noise_floor(&self) -> f64 {
        4.0 * self.c_const.powi(2) * self.covering_radius.powi(2) / self.tau
    }

    /// `Δ(1/τ, t) = 4Ct`.
    pub fn delta_at(&self, t: f64) -> f64 {
        4.0 * self.c_const * t
    }
}

/// Sample resolution `max_i min_{j≠i} ‖x_i − x_j‖`, a proxy for the
/// covering radius.
pub fn estimate_covering_radius(pc: &PointCloud) -> Result<f64> {
    if pc.n_points() < 2 {
        return Err(MfdError::param("n", "need at least 2 points"));
    }
    let index = NeighborIndex::new(pc.coords());
    Ok(index
        .all_knn(1)
        .into_iter()
        .map(|nn| nn[0].dist2.sqrt())
        .fold(0.0, f64::max))
}

/// Counts `(edge, dimension)` pairs with `|f_r(i) − f_r(j)| > Δ`.
pub fn check_lemma1(pc: &PointCloud, g: &WeightedGraph, meta: &ManifoldMeta) -> usize {
    let x = pc.coords();
    g.edges()
        .iter()
        .map(|&(i, j, _)| {
            (0..pc.ambient_dim())
                .filter(|&r| (x[(i, r)] - x[(j, r)]).abs() > meta.delta)
                .count()
        })
        .sum()
}

/// `fᵀ L f`.
pub fn laplacian_form(l: &Laplacian, f: &[f64]) -> Result<f64> {
    if f.len() != l.dim() {
        return Err(MfdError::ShapeMismatch {
            expected: format!("signal of length {}", l.dim()),
            actual: format!("length {}", f.len()),
        });
    }
    // edge form Σ_{i<j} w_ij (f_i − f_j)², exactly 0 on constants
    let m = l.matrix();
    Ok((0..l.dim())
        .map(|i| {
            m.row(i)
                .filter(|&(j, _)| j > i)
                .map(|(j, v)| -v * (f[i] - f[j]).powi(2))
                .sum::<f64>()
        })
        .sum())
}

fn squared_mean(f: &[f64]) -> Result<f64> {
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    let c_f = mean * mean;
    if c_f == 0.0 {
        return Err(MfdError::ZeroMeanSignal);
    }
    Ok(c_f)
}

/// Each link of the variation chain
/// `fᵀLf/‖f‖² ≤ fᵀLf/(N f̄²) ≤ Δ Σ_i d_i/(N f̄²) ≤ Δ λ_N/C_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationCheck {
    pub laplacian_form: f64,
    pub normalized_form: f64,
    pub mean_normalized_form: f64,
    pub degree_step: f64,
    pub bound: f64,
    pub c_f: f64,
    pub lambda_n: f64,
    pub satisfied: bool,
}

fn variation_chain(l: &Laplacian, f: &[f64], delta: f64, lambda_n: f64) -> Result<VariationCheck> {
    let form = laplacian_form(l, f)?;
    let c_f = squared_mean(f)?;
    let n = f.len() as f64;
    let norm2: f64 = f.iter().map(|v| v * v).sum();
    let normalized_form = form / norm2;
    let bound = delta * lambda_n / c_f;
    Ok(VariationCheck {
        laplacian_form: form,
        normalized_form,
        mean_normalized_form: form / (n * c_f),
        degree_step: delta * l.degrees().iter().sum::<f64>() / (n * c_f),
        bound,
        c_f,
        lambda_n,
        satisfied: normalized_form <= bound,
    })
}

/// Variation bound for a clean coordinate signal; `λ_N` is the Laplacian's
/// own top eigenvalue.
pub fn check_lemma2(l: &Laplacian, f: &[f64], meta: &ManifoldMeta) -> Result<VariationCheck> {
    variation_chain(l, f, meta.delta, l.lambda_n())
}

/// `C_s = Σ_{λ_l > 0} g(sλ_l)² / (s² λ_l)`.
pub fn compute_cs(fb: &FilterBank, eigenvalues: &[f64], s: f64) -> Result<f64> {
    if let Some(&neg) = eigenvalues.iter().find(|&&l| l < -ZERO_EIGENVALUE_TOL) {
        return Err(MfdError::NegativeEigenvalue(neg));
    }
    Ok(eigenvalues
        .iter()
        .filter(|&&l| l > ZERO_EIGENVALUE_TOL)
        .map(|&l| fb.g(s * l).powi(2) / (s * s * l))
        .sum())
}

/// `s·C_s` per scale, the quantity expected to stay roughly level.
pub fn scale_trend(fb: &FilterBank, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    fb.scales()
        .iter()
        .map(|&s| Ok(s * compute_cs(fb, eigenvalues, s)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleBound {
    pub scale: f64,
    pub empirical_energy: f64,
    pub bound: f64,
    pub c_s: f64,
    pub satisfied: bool,
}

/// Band energies `Σ_n Ψ_f(s, n)²` against `s² Δ λ_N / C_f · C_s` for every
/// wavelet scale of `fb`.
pub fn check_theorem1(fb: &FilterBank, es: &EigenSystem, f: &[f64], meta: &ManifoldMeta) -> Result<Vec<ScaleBound>> {
    let c_f = squared_mean(f)?;
    let coeffs = forward_exact(fb, es, f)?;
    let lambda_n = es.lambda_max();
    let energies = coeffs.energies();
    fb.scales()
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let c_s = compute_cs(fb, &es.eigenvalues, s)?;
            let bound = s * s * meta.delta * lambda_n / c_f * c_s;
            let empirical_energy = energies[j + 1];
            Ok(ScaleBound {
                scale: s,
                empirical_energy,
                bound,
                c_s,
                satisfied: empirical_energy <= bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub scale: f64,
    pub mc_mean_energy: f64,
    pub mc_std_err: f64,
    /// `s² σ² C_s`.
    pub noise_bound: f64,
    /// Exact expectation `σ² Σ_l g(sλ_l)²`, for reference.
    pub expected_energy: f64,
    /// Mean energy within three standard errors of the bound.
    pub satisfied: bool,
    pub vertex_mean: Vec<f64>,
    pub vertex_std_err: Vec<f64>,
    /// Vertices whose mean coefficient lies within three standard errors of 0.
    pub vertices_centered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma3Report {
    pub sigma2: f64,
    pub trials: usize,
    pub seed: u64,
    pub scales: Vec<NoiseRecord>,
    /// Mean energy at scale `j` over scale `j + 1`.
    pub adjacent_ratios: Vec<f64>,
}

impl Lemma3Report {
    pub fn all_satisfied(&self) -> bool {
        self.scales.iter().all(|r| r.satisfied)
    }

    pub fn all_vertices_centered(&self) -> bool {
        self.scales.iter().all(|r| r.vertices_centered == r.vertex_mean.len())
    }
}

/// Monte Carlo over i.i.d. `N(0, σ²)` signals on the graph of `es`. Trial
/// `t` draws from stream `t` of a generator seeded with `seed`.
pub fn check_lemma3(fb: &FilterBank, es: &EigenSystem, sigma2: f64, trials: usize, seed: u64) -> Result<Lemma3Report> {
    if trials < 30 {
        return Err(MfdError::param("trials", format!("need at least 30, got {trials}")));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(MfdError::param("sigma2", format!("must be non-negative, got {sigma2}")));
    }
    let n = es.n();
    let sd = sigma2.sqrt();
    let j_count = fb.j_count();
    // gains[j][l] = g(s_j λ_l)
    let gains: Vec<Vec<f64>> = fb
        .scales()
        .iter()
        .map(|&s| es.eigenvalues.iter().map(|&l| fb.g(s * l)).collect())
        .collect();

    // per trial: coefficients per scale, collected in trial order so that
    // the reduction below is independent of scheduling
    let per_trial: Vec<Vec<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let eps: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let ehat = gft(es, &eps)?;
            gains
                .iter()
                .map(|gain| {
                    let filtered: Vec<f64> = gain.iter().zip(&ehat).map(|(g, e)| g * e).collect();
                    crate::sgw::igft(es, &filtered)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(j_count);
    for (j, &s) in fb.scales().iter().enumerate() {
        let energies: Vec<f64> = per_trial
            .iter()
            .map(|c| c[j].iter().map(|v| v * v).sum())
            .collect();
        let (mean, se) = mean_and_std_err(&energies);
        let mut vertex_mean = vec![0.0; n];
        let mut vertex_std_err = vec![0.0; n];
        for v in 0..n {
            let samples: Vec<f64> = per_trial.iter().map(|c| c[j][v]).collect();
            let (m, e) = mean_and_std_err(&samples);
            vertex_mean[v] = m;
            vertex_std_err[v] = e;
        }
        let vertices_centered = vertex_mean
            .iter()
            .zip(&vertex_std_err)
            .filter(|(m, e)| m.abs() <= 3.0 * **e)
            .count();
        let c_s = compute_cs(fb, &es.eigenvalues, s)?;
        let noise_bound = s * s * sigma2 * c_s;
        records.push(NoiseRecord {
            scale: s,
            mc_mean_energy: mean,
            mc_std_err: se,
            noise_bound,
            expected_energy: sigma2 * gains[j].iter().map(|g| g * g).sum::<f64>(),
            satisfied: mean <= noise_bound + 3.0 * se,
            vertex_mean,
            vertex_std_err,
            vertices_centered,
        });
    }
    let adjacent_ratios = records
        .windows(2)
        .map(|w| w[0].mc_mean_energy / w[1].mc_mean_energy)
        .collect();
    Ok(Lemma3Report {
        sigma2,
        trials,
        seed,
        scales: records,
        adjacent_ratios,
    })
}

fn mean_and_std_err(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Clean and noisy graphs of a synthetic cloud, with everything the noisy
/// bound needs.
#[derive(Debug, Clone)]
pub struct NoisySystem {
    pub noisy: PointCloud,
    pub noisy_graph: WeightedGraph,
    pub noisy_laplacian: Laplacian,
    pub noisy_eigen: EigenSystem,
    pub clean_graph: WeightedGraph,
    pub clean_laplacian: Laplacian,
}

impl NoisySystem {
    /// `noisy` must carry its ground truth.
    pub fn build(noisy: &PointCloud, k: usize, sigma_mode: SigmaMode) -> Result<Self> {
        let truth = noisy.truth_cloud().ok_or(MfdError::MissingGroundTruth)?;
        let noisy_graph = build_knn_graph(noisy, k, sigma_mode)?;
        let noisy_laplacian = laplacian(&noisy_graph);
        let noisy_eigen = eigensystem(&noisy_laplacian)?;
        let clean_graph = build_knn_graph(&truth, k, sigma_mode)?;
        let clean_laplacian = laplacian(&clean_graph);
        Ok(Self {
            noisy: noisy.clone(),
            noisy_graph,
            noisy_laplacian,
            noisy_eigen,
            clean_graph,
            clean_laplacian,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyScaleBound {
    pub scale: f64,
    pub empirical_energy: f64,
    /// `s² Δ(1/τ, T + q) (λ_N + d⁽²⁾_max) / C_f̃ · C̃_s`.
    pub noisy_bound: f64,
    /// Same bound without the `d⁽²⁾_max` term.
    pub clean_laplacian_bound: f64,
    pub c_s_tilde: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyDimension {
    pub dimension: usize,
    /// Variation chain of the noisy signal on the noisy graph, with
    /// `Δ(1/τ, T + q)` and `λ_N + d⁽²⁾_max`.
    pub variation: VariationCheck,
    pub scales: Vec<NoisyScaleBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub q_xi: f64,
    pub noise_floor: f64,
    pub max_noise_norm: f64,
    pub min_noise_norm: f64,
    /// Two-hop maximum on the clean graph (enters the bound).
    pub d_max2: usize,
    /// Two-hop maximum on the noisy graph, for information.
    pub d_max2_noisy: usize,
    /// Top eigenvalue of the clean Laplacian (enters the bound).
    pub lambda_n: f64,
    pub lambda_n_noisy: f64,
    /// `q(ξ) > τ`: the bounded-noise assumption fails.
    pub outside_bounded_noise_regime: bool,
    /// `max ‖ξ_i‖ > NOISE_SPREAD_FLAG · q(ξ)/2`.
    pub q_understates_noise: bool,
    pub dimensions: Vec<NoisyDimension>,
}

impl Theorem2Report {
    pub fn all_satisfied(&self) -> bool {
        self.dimensions.iter().all(|d| d.scales.iter().all(|s| s.satisfied))
    }
}

/// Noisy band energies against the noisy bound, for every coordinate.
/// `fb` should be designed on the noisy spectrum.
pub fn check_theorem2(fb: &FilterBank, sys: &NoisySystem, meta: &ManifoldMeta) -> Result<Theorem2Report> {
    let noise = sys.noisy.noise().ok_or(MfdError::MissingGroundTruth)?;
    let norms: Vec<f64> = noise.row_iter().map(|r| r.norm()).collect();
    let floor = meta.noise_floor();
    let q_xi = 2.0 * norms.iter().map(|&x| x.max(floor)).fold(f64::INFINITY, f64::min);
    let max_noise_norm = norms.iter().cloned().fold(0.0, f64::max);
    let min_noise_norm = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_max2 = two_hop_max_degree(&sys.clean_graph);
    let lambda_n = sys.clean_laplacian.lambda_n();
    let delta = meta.delta_at(meta.covering_radius + q_xi);
    let es = &sys.noisy_eigen;

    let c_tilde: Vec<f64> = fb
        .scales()
        .iter()
        .map(|&s| compute_cs(fb, &es.eigenvalues, s))
        .collect::<Result<_>>()?;
    let dimensions = (0..sys.noisy.ambient_dim())
        .map(|r| {
            let f = sys.noisy.signal(r);
            let variation = variation_chain(&sys.noisy_laplacian, &f, delta, lambda_n + d_max2 as f64)?;
            let c_f = variation.c_f;
            let energies = forward_exact(fb, es, &f)?.energies();
            let scales = fb
                .scales()
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let common = s * s * delta / c_f * c_tilde[j];
                    let noisy_bound = common * (lambda_n + d_max2 as f64);
                    NoisyScaleBound {
                        scale: s,
                        empirical_energy: energies[j + 1],
                        noisy_bound,
                        clean_laplacian_bound: common * lambda_n,
                        c_s_tilde: c_tilde[j],
                        satisfied: energies[j + 1] <= noisy_bound,
                    }
                })
                .collect();
            Ok(NoisyDimension {
                dimension: r,
                variation,
                scales,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Theorem2Report {
        q_xi,
        noise_floor: floor,
        max_noise_norm,
        min_noise_norm,
        d_max2,
        d_max2_noisy: two_hop_max_degree(&sys.noisy_graph),
        lambda_n,
        lambda_n_noisy: es.lambda_max(),
        outside_bounded_noise_regime: q_xi > meta.tau,
        q_understates_noise: max_noise_norm > NOISE_SPREAD_FLAG * q_xi / 2.0,
        dimensions,
    })
}
