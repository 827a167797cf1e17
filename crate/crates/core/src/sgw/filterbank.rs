use serde::{Deserialize, Serialize};

use crate::error::{MfdError, Result};

/// Band-pass kernel `g`: `x^α` below `x1`, a cubic on `[x1, x2]` matching
/// value and slope at both ends, and `x2^β x^{-β}` above `x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub beta: f64,
    pub x1: f64,
    pub x2: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
            x1: 1.0,
            x2: 2.0,
        }
    }
}

/// Low-pass scaling function `h(x) = γ exp(−(x/λ_cut)⁴)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub gamma: f64,
    pub lambda_cut: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterBankOptions {
    pub kernel: KernelParams,
    /// Ratio between the largest and smallest wavelet scale.
    pub k_design: f64,
    /// Width of `h` as a fraction of `λ_max / k_design`.
    pub h_width: f64,
}

impl Default for FilterBankOptions {
    fn default() -> Self {
        Self {
            kernel: KernelParams::default(),
            k_design: 20.0,
            h_width: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    scales: Vec<f64>,
    kernel: KernelParams,
    scaling: ScalingParams,
    lambda_max: f64,
    /// Cubic segment in `t = (x − x1)/(x2 − x1)`, lowest power first.
    cubic: [f64; 4],
}

/// Builds the kernel, scaling function and `J` log-spaced scales from
/// `x2·k_design/λ_max` (coarsest) down to `x2/λ_max` (finest). A single
/// scale is the coarsest one.
pub fn design_filterbank(lambda_max: f64, j_scales: usize, options: &FilterBankOptions) -> Result<FilterBank> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(MfdError::param("lambda_max", format!("must be positive, got {lambda_max}")));
    }
    if j_scales == 0 {
        return Err(MfdError::param("j_scales", "need at least one wavelet scale"));
    }
    let KernelParams { alpha, beta, x1, x2 } = options.kernel;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(MfdError::param("kernel", "alpha and beta must be positive"));
    }
    if !(x1 > 0.0 && x2 > x1 && x2.is_finite()) {
        return Err(MfdError::param("kernel", "need 0 < x1 < x2"));
    }
    if !(options.k_design > 1.0 && options.h_width > 0.0) {
        return Err(MfdError::param("k_design", "k_design must exceed 1 and h_width be positive"));
    }

    let width = x2 - x1;
    let (v1, d1) = (x1.powf(alpha), alpha * x1.powf(alpha - 1.0));
    let (v2, d2) = (1.0, -beta / x2);
    let cubic = [
        v1,
        width * d1,
        3.0 * (v2 - v1) - 2.0 * width * d1 - width * d2,
        2.0 * (v1 - v2) + width * d1 + width * d2,
    ];

    let s_max = x2 * options.k_design / lambda_max;
    let s_min = x2 / lambda_max;
    let scales = if j_scales == 1 {
        vec![s_max]
    } else {
        let ratio = (s_min / s_max).ln() / (j_scales - 1) as f64;
        (0..j_scales).map(|j| s_max * (ratio * j as f64).exp()).collect()
    };

    let mut fb = FilterBank {
        scales,
        kernel: options.kernel,
        scaling: ScalingParams {
            gamma: 0.0,
            lambda_cut: options.h_width * lambda_max / options.k_design,
        },
        lambda_max,
        cubic,
    };
    fb.scaling.gamma = fb.kernel_max();
    Ok(fb)
}

impl FilterBank {
    /// Wavelet scales, coarsest (largest) first.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn j_count(&self) -> usize {
        self.scales.len()
    }

    /// Scaling band plus one band per scale.
    pub fn n_bands(&self) -> usize {
        self.scales.len() + 1
    }

    pub fn kernel_params(&self) -> KernelParams {
        self.kernel
    }

    pub fn scaling_params(&self) -> ScalingParams {
        self.scaling
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn g(&self, x: f64) -> f64 {
        let KernelParams { alpha, beta, x1, x2 } = self.kernel;
        if x < x1 {
            if x <= 0.0 {
                0.0
            } else {
                x.powf(alpha)
            }
        } else if x <= x2 {
            let t = (x - x1) / (x2 - x1);
            let c = &self.cubic;
            c[0] + t * (c[1] + t * (c[2] + t * c[3]))
        } else {
            (x2 / x).powf(beta)
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        self.scaling.gamma * (-(x / self.scaling.lambda_cut).powi(4)).exp()
    }

    /// Spectral response of `band` at eigenvalue `lambda`; band 0 is the
    /// scaling band, band `j ≥ 1` the wavelet at scale `scales()[j − 1]`.
    pub fn response(&self, band: usize, lambda: f64) -> f64 {
        if band == 0 {
            self.h(lambda)
        } else {
            self.g(self.scales[band - 1] * lambda)
        }
    }

    /// Maximum of `g` over `x ≥ 0`. Both outer branches are monotone, so the
    /// maximum sits at `x1`, `x2` or a stationary point of the cubic.
    pub fn kernel_max(&self) -> f64 {
        let KernelParams { x1, x2, .. } = self.kernel;
        let c = &self.cubic;
        let mut best = self.g(x1).max(self.g(x2));
        // p'(t) = c1 + 2 c2 t + 3 c3 t²
        let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
        let mut roots = Vec::new();
        if a.abs() < 1e-300 {
            if b != 0.0 {
                roots.push(-cc / b);
            }
        } else {
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-b + sq) / (2.0 * a));
                roots.push((-b - sq) / (2.0 * a));
            }
        }
        for t in roots {
            if (0.0..=1.0).contains(&t) {
                best = best.max(self.g(x1 + t * (x2 - x1)));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_bank() -> FilterBank {
        design_filterbank(4.0, 5, &FilterBankOptions::default()).unwrap()
    }

    #[test]
    fn default_cubic_is_known_polynomial() {
        let fb = default_bank();
        for i in 0..=100 {
            let x = 1.0 + i as f64 / 100.0;
            let p = -5.0 + 11.0 * x - 6.0 * x * x + x * x * x;
            assert!((fb.g(x) - p).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_boundary_values() {
        let fb = default_bank();
        assert_eq!(fb.g(0.0), 0.0);
        let eps = 1e-12;
        assert!((fb.g(1.0 - eps) - fb.g(1.0 + eps)).abs() < 1e-10);
        assert!((fb.g(2.0 - eps) - fb.g(2.0 + eps)).abs() < 1e-10);
        assert!(fb.g(1e6) < 1e-11);
    }

    #[test]
    fn kernel_max_matches_grid_search() {
        let fb = default_bank();
        let grid_max = (1..=100_000).map(|i| fb.g(i as f64 * 1e-4)).fold(0.0, f64::max);
        let expected = 1.0 + 2.0 / (3.0 * 3f64.sqrt());
        assert!((fb.kernel_max() - expected).abs() < 1e-14);
        assert!((grid_max - expected).abs() < 1e-7);
        assert_eq!(fb.scaling_params().gamma, fb.kernel_max());
        // attained inside [1, 2] at 2 − 1/√3
        assert!((fb.g(2.0 - 1.0 / 3f64.sqrt()) - expected).abs() < 1e-14);
    }

    #[test]
    fn scales_log_spaced() {
        let fb = default_bank();
        let s = fb.scales();
        assert!((s[0] - 2.0 * 20.0 / 4.0).abs() < 1e-12);
        assert!((s[4] - 0.5).abs() < 1e-12);
        let r = s[1] / s[0];
        for w in s.windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert!((fb.scaling_params().lambda_cut - 0.6 * 4.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn design_errors() {
        let o = FilterBankOptions::default();
        assert!(design_filterbank(0.0, 5, &o).is_err());
        assert!(design_filterbank(-1.0, 5, &o).is_err());
        assert!(design_filterbank(1.0, 0, &o).is_err());
        assert_eq!(design_filterbank(1.0, 1, &o).unwrap().scales(), &[40.0]);
    }

    proptest! {
        #[test]
        fn kernel_shape_holds_for_any_params(
            alpha in 1.0f64..4.0,
            beta in 0.5f64..4.0,
            x1 in 0.2f64..2.0,
            gap in 0.2f64..3.0,
            lmax in 0.1f64..50.0,
        ) {
            let options = FilterBankOptions {
                kernel: KernelParams { alpha, beta, x1, x2: x1 + gap },
                ..FilterBankOptions::default()
            };
            let fb = design_filterbank(lmax, 4, &options).unwrap();
            prop_assert_eq!(fb.g(0.0), 0.0);
            let eps = 1e-9;
            for x in [x1, x1 + gap] {
                prop_assert!((fb.g(x - eps) - fb.g(x + eps)).abs() < 1e-6);
            }
            prop_assert!((fb.g(x1) - x1.powf(alpha)).abs() < 1e-12);
            prop_assert!(fb.h(0.0) > 0.0);
            let mut prev = fb.h(0.0);
            for i in 1..200 {
                let v = fb.h(i as f64 * lmax / 100.0);
                prop_assert!(v <= prev);
                prev = v;
            }
            let grid_max = (0..20_000).map(|i| fb.g(i as f64 * 5e-4 * (x1 + gap) * 2.0)).fold(0.0, f64::max);
            prop_assert!(fb.kernel_max() >= grid_max - 1e-12);
        }
    }
}
