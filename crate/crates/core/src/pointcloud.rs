//! Point clouds, synthetic manifold samplers, noise injection and CSV I/O.
//!
//! A [`PointCloud`] stores `N` samples in `D` ambient dimensions as an `N×D`
//! column-major matrix, so each column is directly usable as a graph signal.
//! Synthetic clouds carry their noiseless twin in `ground_truth`.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MfdError, Result};

/// Seed of the fixed orthonormal rotation used by the high-dimensional sinus.
pub const SINUS_ROTATION_SEED: u64 = 0x5EED_0200;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: DMatrix<f64>,
    ground_truth: Option<DMatrix<f64>>,
}

impl PointCloud {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        Self::build(coords, None)
    }

    pub fn with_ground_truth(coords: DMatrix<f64>, truth: DMatrix<f64>) -> Result<Self> {
        Self::build(coords, Some(truth))
    }

    /// Builds a cloud from row-major point data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MfdError::NoPoints);
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(MfdError::ShapeMismatch {
                expected: format!("{d} coordinates per point"),
                actual: format!("{} coordinates in row {bad}", rows[bad].len()),
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    fn build(coords: DMatrix<f64>, ground_truth: Option<DMatrix<f64>>) -> Result<Self> {
        if coords.nrows() == 0 {
            return Err(MfdError::NoPoints);
        }
        if coords.ncols() == 0 {
            return Err(MfdError::param("coords", "ambient dimension must be at least 1"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(MfdError::param("coords", "all coordinates must be finite"));
        }
        if let Some(t) = &ground_truth {
            if t.shape() != coords.shape() {
                return Err(MfdError::ShapeMismatch {
                    expected: format!("{:?}", coords.shape()),
                    actual: format!("{:?}", t.shape()),
                });
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(MfdError::param("ground_truth", "all coordinates must be finite"));
            }
        }
        Ok(Self {
            coords,
            ground_truth,
        })
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn ground_truth(&self) -> Option<&DMatrix<f64>> {
        self.ground_truth.as_ref()
    }

    /// Coordinate signal `f_r`: column `r` of the coordinate matrix.
    pub fn signal(&self, r: usize) -> Vec<f64> {
        self.coords.column(r).iter().copied().collect()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coords.row(i).iter().copied().collect()
    }

    /// The noiseless twin as a cloud of its own.
    pub fn truth_cloud(&self) -> Option<PointCloud> {
        self.ground_truth.as_ref().map(|t| PointCloud {
            coords: t.clone(),
            ground_truth: Some(t.clone()),
        })
    }

    /// Per-point noise vectors `x̃_i − x_i`.
    pub fn noise(&self) -> Option<DMatrix<f64>> {
        self.ground_truth.as_ref().map(|t| &self.coords - t)
    }

    pub fn without_ground_truth(&self) -> PointCloud {
        PointCloud {
            coords: self.coords.clone(),
            ground_truth: None,
        }
    }

    /// Replaces the coordinates, keeping any ground truth.
    pub fn with_coords(&self, coords: DMatrix<f64>) -> Result<PointCloud> {
        Self::build(coords, self.ground_truth.clone())
    }

    /// Adds `offset` to every coordinate of both the cloud and its ground truth.
    pub fn translated(&self, offset: f64) -> PointCloud {
        PointCloud {
            coords: self.coords.add_scalar(offset),
            ground_truth: self.ground_truth.as_ref().map(|t| t.add_scalar(offset)),
        }
    }

    /// Largest pairwise distance (exact, O(N²)).
    pub fn diameter(&self) -> f64 {
        let n = self.n_points();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = (0..self.ambient_dim())
                    .map(|r| (self.coords[(i, r)] - self.coords[(j, r)]).powi(2))
                    .sum();
                best = best.max(d2);
            }
        }
        best.sqrt()
    }

    /// Permutes ambient dimensions: output column `c` is input column `perm[c]`.
    pub fn permute_dims(&self, perm: &[usize]) -> Result<PointCloud> {
        let d = self.ambient_dim();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(MfdError::param("perm", "must be a permutation of the ambient dimensions"));
        }
        let select = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), d, |i, c| m[(i, perm[c])]);
        Ok(PointCloud {
            coords: select(&self.coords),
            ground_truth: self.ground_truth.as_ref().map(select),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Circle,
    Helix,
    SwissRollWithHole,
    FishBowl,
    Sphere,
    SinusHighdim,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 6] = [
        ManifoldKind::Circle,
        ManifoldKind::Helix,
        ManifoldKind::SwissRollWithHole,
        ManifoldKind::FishBowl,
        ManifoldKind::Sphere,
        ManifoldKind::SinusHighdim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Helix => "helix",
            ManifoldKind::SwissRollWithHole => "swiss-roll-with-hole",
            ManifoldKind::FishBowl => "fish-bowl",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::SinusHighdim => "sinus-highdim",
        }
    }

    /// Reach `τ` for the shapes where it is known in closed form.
    ///
    /// Circle and sphere: the radius. Helix `(R cos t, R sin t, c t)`: the
    /// smaller of the curvature radius `(R² + c²)/R` and half the distance
    /// between consecutive turns, `π c`.
    pub fn analytic_tau(self, params: &ShapeParams) -> Option<f64> {
        match self {
            ManifoldKind::Circle | ManifoldKind::Sphere => Some(params.radius),
            ManifoldKind::Helix => {
                let (r, c) = (params.radius, params.helix_pitch);
                Some(((r * r + c * c) / r).min(std::f64::consts::PI * c))
            }
            _ => None,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = MfdError;

    fn from_str(s: &str) -> Result<Self> {
        ManifoldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MfdError::UnknownManifold(s.to_string()))
    }
}

/// Shape parameters for every sampler; each kind reads only the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    /// Circle, helix, sphere and fish-bowl radius.
    pub radius: f64,
    /// Helix rise per radian.
    pub helix_pitch: f64,
    pub helix_turns: f64,
    /// Swiss roll angular range `[t_min, t_max]`.
    pub roll_t_min: f64,
    pub roll_t_max: f64,
    pub roll_height: f64,
    /// Centre of the hole in the `(t, h)` parameter rectangle.
    pub hole_t: f64,
    pub hole_h: f64,
    pub hole_radius: f64,
    /// Polar angle of the cap removed from the top of the fish bowl.
    pub cap_angle: f64,
    /// Sinus parameter range `[0, sinus_t_max]`.
    pub sinus_t_max: f64,
    pub sinus_ambient_dim: usize,
}

impl Default for ShapeParams {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            radius: 1.0,
            helix_pitch: 0.25,
            helix_turns: 3.0,
            roll_t_min: 1.5 * PI,
            roll_t_max: 4.5 * PI,
            roll_height: 21.0,
            hole_t: 3.0 * PI,
            hole_h: 10.5,
            hole_radius: 3.0,
            cap_angle: PI / 4.0,
            sinus_t_max: 4.0 * PI,
            sinus_ambient_dim: 200,
        }
    }
}

impl ShapeParams {
    fn validate(&self, kind: ManifoldKind) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(MfdError::param(name, format!("must be positive, got {v}")))
            }
        };
        match kind {
            ManifoldKind::Circle | ManifoldKind::Sphere => positive("radius", self.radius),
            ManifoldKind::Helix => {
                positive("radius", self.radius)?;
                positive("helix_pitch", self.helix_pitch)?;
                positive("helix_turns", self.helix_turns)
            }
            ManifoldKind::SwissRollWithHole => {
                positive("roll_t_min", self.roll_t_min)?;
                positive("roll_height", self.roll_height)?;
                positive("hole_radius", self.hole_radius)?;
                if self.roll_t_max <= self.roll_t_min {
                    return Err(MfdError::param("roll_t_max", "must exceed roll_t_min"));
                }
                let area = (self.roll_t_max - self.roll_t_min) * self.roll_height;
                if std::f64::consts::PI * self.hole_radius.powi(2) >= area {
                    return Err(MfdError::param("hole_radius", "hole covers the whole parameter domain"));
                }
                Ok(())
            }
            ManifoldKind::FishBowl => {
                positive("radius", self.radius)?;
                positive("cap_angle", self.cap_angle)?;
                if self.cap_angle >= std::f64::consts::PI {
                    return Err(MfdError::param("cap_angle", "must be below π"));
                }
                Ok(())
            }
            ManifoldKind::SinusHighdim => {
                positive("sinus_t_max", self.sinus_t_max)?;
                if self.sinus_ambient_dim < 2 {
                    return Err(MfdError::param("sinus_ambient_dim", "must be at least 2"));
                }
                Ok(())
            }
        }
    }
}

/// Samples `n` noiseless points, uniform in the parameter domain of `kind`
/// (area-uniform for the sphere).
pub fn sample_manifold(
    kind: ManifoldKind,
    n: usize,
    params: &ShapeParams,
    seed: u64,
) -> Result<PointCloud> {
    use std::f64::consts::PI;
    if n < 2 {
        return Err(MfdError::param("n", format!("need at least 2 points, got {n}")));
    }
    params.validate(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = match kind {
        ManifoldKind::Circle => (0..n)
            .map(|_| {
                let th = rng.random_range(0.0..2.0 * PI);
                vec![params.radius * th.cos(), params.radius * th.sin()]
            })
            .collect(),
        ManifoldKind::Helix => (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..2.0 * PI * params.helix_turns);
                vec![
                    params.radius * t.cos(),
                    params.radius * t.sin(),
                    params.helix_pitch * t,
                ]
            })
            .collect(),
        ManifoldKind::SwissRollWithHole => {
            let mut rows = Vec::with_capacity(n);
            while rows.len() < n {
                let t = rng.random_range(params.roll_t_min..params.roll_t_max);
                let h = rng.random_range(0.0..params.roll_height);
                let in_hole = (t - params.hole_t).powi(2) + (h - params.hole_h).powi(2)
                    < params.hole_radius.powi(2);
                if !in_hole {
                    rows.push(vec![t * t.cos(), h, t * t.sin()]);
                }
            }
            rows
        }
        ManifoldKind::FishBowl => (0..n)
            .map(|_| {
                let polar = rng.random_range(params.cap_angle..PI);
                let az = rng.random_range(0.0..2.0 * PI);
                let r = params.radius;
                vec![
                    r * polar.sin() * az.cos(),
                    r * polar.sin() * az.sin(),
                    r * polar.cos(),
                ]
            })
            .collect(),
        ManifoldKind::Sphere => (0..n)
            .map(|_| {
                let v: Vec<f64> = loop {
                    let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
                    if norm(&v) > 1e-12 {
                        break v;
                    }
                };
                let s = params.radius / norm(&v);
                v.into_iter().map(|x| x * s).collect()
            })
            .collect(),
        ManifoldKind::SinusHighdim => {
            let dim = params.sinus_ambient_dim;
            let rot = orthonormal_matrix(dim, SINUS_ROTATION_SEED);
            (0..n)
                .map(|_| {
                    let t = rng.random_range(0.0..params.sinus_t_max);
                    let (a, b) = (t, t.sin());
                    (0..dim).map(|r| rot[(r, 0)] * a + rot[(r, 1)] * b).collect()
                })
                .collect()
        }
    };
    let coords = DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]);
    PointCloud::with_ground_truth(coords.clone(), coords)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random orthonormal matrix from the QR factorisation of a seeded Gaussian matrix.
fn orthonormal_matrix(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Adds i.i.d. `N(0, variance)` noise to every coordinate. The input
/// coordinates become the ground truth of the result.
pub fn add_gaussian_noise(pc: &PointCloud, variance: f64, seed: u64) -> Result<PointCloud> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(MfdError::param("variance", format!("must be non-negative, got {variance}")));
    }
    let sd = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = pc.coords.clone();
    // Column-major fill keeps the draw order independent of D.
    let noisy = DMatrix::from_fn(truth.nrows(), truth.ncols(), |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        truth[(i, j)] + sd * z
    });
    PointCloud::with_ground_truth(noisy, truth)
}

/// Per-entry root mean square difference over all `N·D` coordinates.
pub fn rmse(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    rmse_matrix(a.coords(), b.coords())
}

pub fn rmse_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(MfdError::ShapeMismatch {
            expected: format!("{:?}", a.shape()),
            actual: format!("{:?}", b.shape()),
        });
    }
    let sum: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Path of the ground-truth sibling of a point file: `c.csv` → `c.truth.csv`.
pub fn truth_sibling(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    path.with_file_name(format!("{stem}.truth.{ext}"))
}

/// Reads one point per row; lines starting with `#` are ignored.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => MfdError::Parse {
                line: pos.as_ref().map_or(0, |p| p.line()),
                reason: format!("expected {expected_len} fields, found {len}"),
            },
            _ => MfdError::Csv(e),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| MfdError::Parse {
                    line,
                    reason: format!("non-numeric cell `{cell}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MfdError::Parse {
                line,
                reason: "non-finite value".to_string(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MfdError::NoPoints);
    }
    PointCloud::from_rows(&rows)
}

/// Writes coordinates with 17 significant digits, preceded by a `#` header.
pub fn save_csv(pc: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_csv(pc.coords(), path)
}

pub(crate) fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    let header: Vec<String> = (0..m.ncols()).map(|r| format!("x{r}")).collect();
    writeln!(out, "# {}", header.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_f64(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Scientific notation with 17 significant digits (exact round trip).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
