use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{FilterBank, WaveletCoefficients};
use crate::error::{MfdError, Result};
use crate::graph::Laplacian;

/// Number of equispaced points on `[0, λ_max]` used to report sup errors.
pub const SUP_ERROR_GRID: usize = 10_000;
/// Default iteration cap for the frame-inversion conjugate gradients.
pub const CG_MAX_ITER: usize = 500;

/// Truncated Chebyshev series on `[0, λ_max]`, evaluated as
/// `c₀/2 + Σ_{k≥1} c_k T_k(2x/λ_max − 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    pub coeffs: Vec<f64>,
    pub lambda_max: f64,
    /// Max deviation from the kernel over the reporting grid.
    pub sup_error: f64,
}

impl ChebyshevSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, 2.0 * x / self.lambda_max - 1.0)
    }
}

fn clenshaw(c: &[f64], y: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] / 2.0 + y * b1 - b2
}

/// Chebyshev coefficients of `kernel` on `[0, lambda_max]` up to order `m`,
/// by Gauss–Chebyshev quadrature on `4(m + 1)` nodes.
pub fn chebyshev_coefficients(kernel: impl Fn(f64) -> f64, m: usize, lambda_max: f64) -> Result<ChebyshevSeries> {
    if m == 0 {
        return Err(MfdError::param("m", "Chebyshev order must be at least 1"));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(MfdError::param("lambda_max", format!("must be positive, got {lambda_max}")));
    }
    let nodes = 4 * (m + 1);
    let a = lambda_max / 2.0;
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|i| {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / nodes as f64;
            (theta, kernel(a * (theta.cos() + 1.0)))
        })
        .collect();
    let coeffs: Vec<f64> = (0..=m)
        .map(|k| 2.0 / nodes as f64 * samples.iter().map(|(t, v)| v * (k as f64 * t).cos()).sum::<f64>())
        .collect();
    let mut series = ChebyshevSeries {
        coeffs,
        lambda_max,
        sup_error: 0.0,
    };
    series.sup_error = (0..SUP_ERROR_GRID)
        .map(|i| {
            let x = lambda_max * i as f64 / (SUP_ERROR_GRID - 1) as f64;
            (series.eval(x) - kernel(x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(series)
}

/// Coefficients of the product of two series, in the same `c₀/2` convention.
fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let plain = |c: &[f64]| {
        let mut p = c.to_vec();
        p[0] /= 2.0;
        p
    };
    let (pa, pb) = (plain(a), plain(b));
    let mut out = vec![0.0; a.len() + b.len() - 1];
    // T_i T_j = (T_{i+j} + T_{|i−j|}) / 2
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            let v = 0.5 * x * y;
            out[i + j] += v;
            out[i.abs_diff(j)] += v;
        }
    }
    out[0] *= 2.0;
    out
}

/// `y = L x` for an `N×d` row-major block.
fn laplacian_block(l: &Laplacian, x: &[f64], d: usize, y: &mut [f64]) {
    let m = l.matrix();
    let row = |i: usize, yi: &mut [f64]| {
        yi.fill(0.0);
        for (j, w) in m.row(i) {
            for (acc, xv) in yi.iter_mut().zip(&x[j * d..(j + 1) * d]) {
                *acc += w * xv;
            }
        }
    };
    if d == 1 {
        for (i, yi) in y.chunks_mut(1).enumerate() {
            row(i, yi);
        }
    } else {
        y.par_chunks_mut(d).enumerate().for_each(|(i, yi)| row(i, yi));
    }
}

/// Applies every coefficient set to the same `N×d` row-major block, sharing
/// one three-term recurrence `T_k(L̃) x` with `L̃ = L/a − I`, `a = λ_max/2`.
fn filter_block(l: &Laplacian, lambda_max: f64, x: &[f64], d: usize, sets: &[&[f64]]) -> Vec<Vec<f64>> {
    let len = x.len();
    let a = lambda_max / 2.0;
    let max_order = sets.iter().map(|c| c.len() - 1).max().unwrap_or(0);
    let mut out: Vec<Vec<f64>> = sets.iter().map(|c| x.iter().map(|v| 0.5 * c[0] * v).collect()).collect();
    if max_order == 0 {
        return out;
    }
    let mut prev = x.to_vec();
    let mut cur = vec![0.0; len];
    let mut lx = vec![0.0; len];
    laplacian_block(l, x, d, &mut lx);
    for i in 0..len {
        cur[i] = (lx[i] - a * x[i]) / a;
    }
    let accumulate = |out: &mut Vec<Vec<f64>>, k: usize, t: &[f64]| {
        for (o, c) in out.iter_mut().zip(sets) {
            if let Some(&ck) = c.get(k) {
                o.iter_mut().zip(t).for_each(|(acc, v)| *acc += ck * v);
            }
        }
    };
    accumulate(&mut out, 1, &cur);
    for k in 2..=max_order {
        laplacian_block(l, &cur, d, &mut lx);
        for i in 0..len {
            // reuse `prev` as storage for T_{k}
            prev[i] = 2.0 * (lx[i] - a * cur[i]) / a - prev[i];
        }
        std::mem::swap(&mut prev, &mut cur);
        accumulate(&mut out, k, &cur);
    }
    out
}

/// Per-band Chebyshev approximations of a filter bank, plus the series of
/// the frame operator `Σ_b p_b²` used for inversion.
#[derive(Debug, Clone)]
pub struct ChebyshevBank {
    series: Vec<ChebyshevSeries>,
    frame: Vec<f64>,
    lambda_max: f64,
}

impl ChebyshevBank {
    pub fn new(fb: &FilterBank, m: usize) -> Result<Self> {
        let series = (0..fb.n_bands())
            .map(|b| chebyshev_coefficients(|x| fb.response(b, x), m, fb.lambda_max()))
            .collect::<Result<Vec<_>>>()?;
        let mut frame = vec![0.0; 2 * m + 1];
        for s in &series {
            frame
                .iter_mut()
                .zip(product(&s.coeffs, &s.coeffs))
                .for_each(|(acc, v)| *acc += v);
        }
        Ok(Self {
            series,
            frame,
            lambda_max: fb.lambda_max(),
        })
    }

    pub fn order(&self) -> usize {
        self.series[0].order()
    }

    pub fn series(&self) -> &[ChebyshevSeries] {
        &self.series
    }

    /// Reported grid sup error per band, scaling band first.
    pub fn sup_errors(&self) -> Vec<f64> {
        self.series.iter().map(|s| s.sup_error).collect()
    }

    fn check(&self, l: &Laplacian, len: usize) -> Result<()> {
        if len != l.dim() {
            return Err(MfdError::ShapeMismatch {
                expected: format!("signal of length {}", l.dim()),
                actual: format!("length {len}"),
            });
        }
        Ok(())
    }

    pub fn forward(&self, l: &Laplacian, f: &[f64]) -> Result<WaveletCoefficients> {
        self.check(l, f.len())?;
        let sets: Vec<&[f64]> = self.series.iter().map(|s| s.coeffs.as_slice()).collect();
        WaveletCoefficients::from_bands(filter_block(l, self.lambda_max, f, 1, &sets))
    }

    /// Transforms every column of an `N×D` block with one shared recurrence.
    pub fn forward_block(&self, l: &Laplacian, signals: &DMatrix<f64>) -> Result<Vec<WaveletCoefficients>> {
        self.check(l, signals.nrows())?;
        let (n, d) = signals.shape();
        let mut x = Vec::with_capacity(n * d);
        for i in 0..n {
            x.extend(signals.row(i).iter());
        }
        let sets: Vec<&[f64]> = self.series.iter().map(|s| s.coeffs.as_slice()).collect();
        let bands = filter_block(l, self.lambda_max, &x, d, &sets);
        (0..d)
            .map(|r| {
                let per_dim = bands.iter().map(|b| (0..n).map(|i| b[i * d + r]).collect()).collect();
                WaveletCoefficients::from_bands(per_dim)
            })
            .collect()
    }

    /// Synthesis `Σ_b p_b(L) c_b`; all-zero bands are skipped.
    pub fn adjoint(&self, l: &Laplacian, coeffs: &WaveletCoefficients) -> Result<Vec<f64>> {
        self.check(l, coeffs.n())?;
        if coeffs.n_bands() != self.series.len() {
            return Err(MfdError::ShapeMismatch {
                expected: format!("{} bands", self.series.len()),
                actual: format!("{} bands", coeffs.n_bands()),
            });
        }
        let mut out = vec![0.0; coeffs.n()];
        for (band, s) in coeffs.bands().iter().zip(&self.series) {
            if band.iter().all(|&v| v == 0.0) {
                continue;
            }
            let y = filter_block(l, self.lambda_max, band, 1, &[&s.coeffs]);
            out.iter_mut().zip(&y[0]).for_each(|(o, v)| *o += v);
        }
        Ok(out)
    }

    /// Applies the frame operator `Σ_b p_b(L)²`.
    pub fn frame_operator(&self, l: &Laplacian, f: &[f64]) -> Vec<f64> {
        filter_block(l, self.lambda_max, f, 1, &[&self.frame]).pop().expect("one set")
    }

    /// Least-squares synthesis: solves `(Σ p_b²) f = Σ p_b c_b` by conjugate
    /// gradients to relative residual `tol`.
    pub fn inverse(
        &self,
        l: &Laplacian,
        coeffs: &WaveletCoefficients,
        tol: f64,
        max_iter: usize,
    ) -> Result<Reconstruction> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(MfdError::param("tol", format!("must be positive, got {tol}")));
        }
        let rhs = self.adjoint(l, coeffs)?;
        conjugate_gradients(|x| self.frame_operator(l, x), &rhs, tol, max_iter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub signal: Vec<f64>,
    pub iterations: usize,
    /// Final `‖r‖ / ‖rhs‖`.
    pub relative_residual: f64,
}

fn conjugate_gradients(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Reconstruction> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = rhs.len();
    let rhs_norm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(Reconstruction {
            signal: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / rhs_norm;
        if rel <= tol {
            return Ok(Reconstruction {
                signal: x,
                iterations: it,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(MfdError::CgNotConverged {
        iterations: max_iter,
        residual: rr.sqrt() / rhs_norm,
    })
}

/// Wavelet transform of one signal using order-`m` Chebyshev approximations.
pub fn forward_chebyshev(fb: &FilterBank, l: &Laplacian, f: &[f64], m: usize) -> Result<WaveletCoefficients> {
    ChebyshevBank::new(fb, m)?.forward(l, f)
}

/// Wavelet transform of every column of `signals`.
pub fn forward_chebyshev_block(
    fb: &FilterBank,
    l: &Laplacian,
    signals: &DMatrix<f64>,
    m: usize,
) -> Result<Vec<WaveletCoefficients>> {
    ChebyshevBank::new(fb, m)?.forward_block(l, signals)
}

/// Recovers a signal from (possibly band-zeroed) coefficients; see
/// [`ChebyshevBank::inverse`].
pub fn inverse(fb: &FilterBank, l: &Laplacian, coeffs: &WaveletCoefficients, m: usize, tol: f64) -> Result<Vec<f64>> {
    Ok(ChebyshevBank::new(fb, m)?.inverse(l, coeffs, tol, CG_MAX_ITER)?.signal)
}
