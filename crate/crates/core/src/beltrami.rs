//! Beltrami coefficients: validation, auxiliary metrics, estimation from
//! piecewise-linear maps, composition and map distance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::HalfedgeMesh;
use crate::metric::{face_area, DiscreteMetric, Geometry, MetricError};
use crate::param::{ParamError, Parameterization};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BeltramiError {
    #[error("|mu| = {modulus} at vertex {vertex} is not below 1")]
    NotSubunit { vertex: usize, modulus: f64 },

    #[error("mu at vertex {0} is not finite")]
    NonFinite(usize),

    #[error("expected {expected} values, got {found}")]
    Count { expected: usize, found: usize },

    #[error("edge {0} has zero length in the parameterization")]
    ZeroEdge(usize),

    #[error("source triangle {0} is degenerate")]
    DegenerateSource(usize),

    #[error("map collapses face {0}")]
    DegenerateImage(usize),

    #[error("|tau| = {modulus} at vertex {vertex} is not 1")]
    TauModulus { vertex: usize, modulus: f64 },

    #[error("vertex {0} is missing from the field")]
    MissingVertex(usize),

    #[error("vertex {0} appears more than once")]
    DuplicateVertex(usize),

    #[error("invalid field json: {0}")]
    Json(String),

    #[error("mesh has no vertex positions")]
    MissingPositions,

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Param(#[from] ParamError),
}

pub type Result<T> = std::result::Result<T, BeltramiError>;

/// Largest `|μ|`, or an error if some value is not strictly inside the unit disk.
pub fn validate_field(values: &[Complex64]) -> Result<f64> {
    let mut max: f64 = 0.0;
    for (v, mu) in values.iter().enumerate() {
        let m = mu.norm();
        if !m.is_finite() {
            return Err(BeltramiError::NonFinite(v));
        }
        if m >= 1.0 {
            return Err(BeltramiError::NotSubunit { vertex: v, modulus: m });
        }
        max = max.max(m);
    }
    Ok(max)
}

/// Dilation `(1 + |μ|) / (1 − |μ|)` of the infinitesimal ellipse.
pub fn dilation(mu: Complex64) -> f64 {
    let m = mu.norm();
    (1.0 + m) / (1.0 - m)
}

/// Per-vertex Beltrami coefficient with `sup |μ| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiField(Vec<Complex64>);

#[derive(Serialize, Deserialize)]
struct Entry {
    i: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    mu: Vec<Entry>,
}

impl BeltramiField {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        validate_field(&values)?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn constant(n: usize, mu: Complex64) -> Result<Self> {
        Self::new(vec![mu; n])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|m| m.re == 0.0 && m.im == 0.0)
    }

    fn expect_len(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(BeltramiError::Count {
                expected: n,
                found: self.0.len(),
            })
        }
    }

    pub fn to_json(&self) -> String {
        let doc = FieldJson {
            mu: self
                .0
                .iter()
                .enumerate()
                .map(|(i, m)| Entry { i, re: m.re, im: m.im })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("field serializes")
    }

    /// Parses `{"mu": [{"i", "re", "im"}, ...]}`; every index in `0..n` must
    /// appear exactly once.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FieldJson = serde_json::from_str(text).map_err(|e| BeltramiError::Json(e.to_string()))?;
        let n = doc.mu.len();
        let mut values: Vec<Option<Complex64>> = vec![None; n];
        for entry in doc.mu {
            let slot = values
                .get_mut(entry.i)
                .ok_or(BeltramiError::MissingVertex(n.min(entry.i)))?;
            if slot.is_some() {
                return Err(BeltramiError::DuplicateVertex(entry.i));
            }
            *slot = Some(Complex64::new(entry.re, entry.im));
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(v, m)| m.ok_or(BeltramiError::MissingVertex(v)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// Scales each edge by `|dz + μ_ij conj(dz)| / |dz|` with `μ_ij` the mean of
/// the endpoint values. Triangle inequalities are not checked.
pub fn auxiliary_metric(
    mesh: &HalfedgeMesh,
    metric: &DiscreteMetric,
    z: &Parameterization,
    mu: &BeltramiField,
) -> Result<DiscreteMetric> {
    metric.expect_geometry(Geometry::Euclidean)?;
    z.expect_len(mesh.n_vertices())?;
    mu.expect_len(mesh.n_vertices())?;
    validate_field(mu.values())?;
    let lengths = (0..mesh.n_edges())
        .map(|e| {
            let [i, j] = mesh.edge_vertices(e);
            let dz = z[j] - z[i];
            let norm = dz.norm();
            if norm == 0.0 {
                return Err(BeltramiError::ZeroEdge(e));
            }
            let mu_ij = (mu.values()[i] + mu.values()[j]) / 2.0;
            if mu_ij == Complex64::new(0.0, 0.0) {
                return Ok(metric.length(e));
            }
            Ok(metric.length(e) * (dz + mu_ij * dz.conj()).norm() / norm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMetric::new(Geometry::Euclidean, lengths)?)
}

/// Per-face and per-vertex Beltrami data of a piecewise-linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiEstimate {
    pub face_mu: Vec<Complex64>,
    pub face_dilation: Vec<f64>,
    /// `conj(f_z) / f_z` per face.
    pub face_tau: Vec<Complex64>,
    /// Source-area weighted averages of the face values.
    pub vertex_mu: Vec<Complex64>,
    /// Area-averaged and renormalized to unit modulus.
    pub vertex_tau: Vec<Complex64>,
    /// Faces where the map reverses orientation (`|f_z̄| ≥ |f_z|`).
    pub reversed: Vec<usize>,
}

impl BeltramiEstimate {
    /// The vertex values as a field; fails if some average leaves the disk.
    pub fn vertex_field(&self) -> Result<BeltramiField> {
        BeltramiField::new(self.vertex_mu.clone())
    }
}

/// Derivatives `(f_z, f_z̄)` of the affine map taking `z` to `w` on one triangle.
pub fn affine_derivatives(z: [Complex64; 3], w: [Complex64; 3]) -> Option<(Complex64, Complex64)> {
    let (dz1, dz2) = (z[1] - z[0], z[2] - z[0]);
    let (dw1, dw2) = (w[1] - w[0], w[2] - w[0]);
    let det = dz1 * dz2.conj() - dz1.conj() * dz2;
    if det.norm() <= 1e-14 * dz1.norm() * dz2.norm() {
        return None;
    }
    let a = (dw1 * dz2.conj() - dw2 * dz1.conj()) / det;
    let b = (dz1 * dw2 - dz2 * dw1) / det;
    Some((a, b))
}

/// Beltrami coefficient of the piecewise-linear map `src → dst`.
pub fn estimate_beltrami(
    mesh: &HalfedgeMesh,
    src: &Parameterization,
    dst: &Parameterization,
) -> Result<BeltramiEstimate> {
    src.expect_len(mesh.n_vertices())?;
    dst.expect_len(mesh.n_vertices())?;
    let n = mesh.n_vertices();
    let mut est = BeltramiEstimate {
        face_mu: Vec::with_capacity(mesh.n_faces()),
        face_dilation: Vec::with_capacity(mesh.n_faces()),
        face_tau: Vec::with_capacity(mesh.n_faces()),
        vertex_mu: vec![Complex64::new(0.0, 0.0); n],
        vertex_tau: vec![Complex64::new(0.0, 0.0); n],
        reversed: Vec::new(),
    };
    let mut weight = vec![0.0; n];
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let z = face.map(|v| src[v]);
        let w = face.map(|v| dst[v]);
        let (a, b) = affine_derivatives(z, w).ok_or(BeltramiError::DegenerateSource(f))?;
        if a.norm() == 0.0 {
            return Err(BeltramiError::DegenerateImage(f));
        }
        if a.norm_sqr() - b.norm_sqr() <= 0.0 {
            est.reversed.push(f);
        }
        let mu = b / a;
        let tau = a.conj() / a;
        est.face_mu.push(mu);
        est.face_dilation.push(dilation(mu));
        est.face_tau.push(tau);
        let area = ((z[1] - z[0]).conj() * (z[2] - z[0])).im.abs() / 2.0;
        for v in face {
            est.vertex_mu[v] += area * mu;
            est.vertex_tau[v] += area * tau;
            weight[v] += area;
        }
    }
    for v in 0..n {
        if weight[v] > 0.0 {
            est.vertex_mu[v] /= weight[v];
        }
        let t = est.vertex_tau[v];
        est.vertex_tau[v] = if t.norm() > 0.0 { t / t.norm() } else { Complex64::new(1.0, 0.0) };
    }
    Ok(est)
}

/// `μ_{g∘f} = (μ_f + μ_g τ) / (1 + conj(μ_f) μ_g τ)` at every vertex, with
/// `μ_g` already pulled back to the source vertices.
pub fn compose_beltrami(
    mu_f: &BeltramiField,
    mu_g: &BeltramiField,
    tau: &[Complex64],
) -> Result<BeltramiField> {
    mu_g.expect_len(mu_f.len())?;
    if tau.len() != mu_f.len() {
        return Err(BeltramiError::Count {
            expected: mu_f.len(),
            found: tau.len(),
        });
    }
    for (v, t) in tau.iter().enumerate() {
        if (t.norm() - 1.0).abs() > 1e-9 {
            return Err(BeltramiError::TauModulus {
                vertex: v,
                modulus: t.norm(),
            });
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let values = mu_f
        .values()
        .iter()
        .zip(mu_g.values())
        .zip(tau)
        .map(|((&f, &g), &t)| {
            if g == Complex64::new(0.0, 0.0) {
                f
            } else {
                (f + g * t) / (one + f.conj() * g * t)
            }
        })
        .collect();
    BeltramiField::new(values)
}

/// Diagonal of the axis-aligned bounding box of the mesh positions.
pub fn bounding_box_diagonal(mesh: &HalfedgeMesh) -> Option<f64> {
    let p = mesh.positions()?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for x in p {
        for k in 0..3 {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    Some((0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().sqrt())
}

/// Normalized L1 distance `∫|f − g| / (diag · area)` with the integral taken
/// per face as area times the corner mean.
pub fn map_distance(
    mesh: &HalfedgeMesh,
    metric: &DiscreteMetric,
    f: &Parameterization,
    g: &Parameterization,
) -> Result<f64> {
    f.expect_len(mesh.n_vertices())?;
    g.expect_len(mesh.n_vertices())?;
    let diag = bounding_box_diagonal(mesh).ok_or(BeltramiError::MissingPositions)?;
    let mut integral = 0.0;
    let mut total = 0.0;
    for face in 0..mesh.n_faces() {
        let area = face_area(metric, mesh, face)?;
        let mean = mesh.face(face).iter().map(|&v| (f[v] - g[v]).norm()).sum::<f64>() / 3.0;
        integral += area * mean;
        total += area;
    }
    Ok(integral / (diag * total))
}
