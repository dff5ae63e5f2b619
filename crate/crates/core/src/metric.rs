//! Discrete metrics: edge lengths interpreted in a Euclidean or hyperbolic
//! background geometry, with the corner angles, curvatures and areas they
//! induce, and conformal deformation by per-vertex factors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::HalfedgeMesh;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricError {
    #[error("edge {edge} has invalid length {value}")]
    InvalidLength { edge: usize, value: f64 },

    #[error("expected {expected} edge lengths, got {found}")]
    LengthCount { expected: usize, found: usize },

    #[error("face {face} violates the triangle inequality")]
    TriangleInequality { face: usize },

    #[error("face {face}: cosine {value} is outside [-1, 1]")]
    CosineOutOfRange { face: usize, value: f64 },

    #[error("conformal deformation overflows on edge {edge}")]
    Overflow { edge: usize },

    #[error("expected a {expected:?} metric, got {found:?}")]
    GeometryMismatch { expected: Geometry, found: Geometry },
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Euclidean,
    Hyperbolic,
}

impl Geometry {
    /// Gaussian curvature of the background space (0 or -1).
    pub fn lambda(self) -> f64 {
        match self {
            Geometry::Euclidean => 0.0,
            Geometry::Hyperbolic => -1.0,
        }
    }
}

/// Per-vertex conformal factors `u`.
pub type ConformalFactor = Vec<f64>;

/// Per-vertex discrete Gaussian curvature (angle deficit).
pub type CurvatureField = Vec<f64>;

/// Corner angles, `angles[f][c]` at corner `c` of face `f`.
pub type CornerAngles = Vec<[f64; 3]>;

/// Positive edge lengths indexed by edge id. Construction checks only
/// positivity; admissibility (triangle inequalities) is checked separately
/// because deformed metrics may legitimately violate it mid-flow.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMetric {
    geometry: Geometry,
    lengths: Vec<f64>,
}

impl DiscreteMetric {
    pub fn new(geometry: Geometry, lengths: Vec<f64>) -> Result<Self> {
        if let Some((edge, &value)) = lengths
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(MetricError::InvalidLength { edge, value });
        }
        Ok(Self { geometry, lengths })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    /// Same lengths read in another background geometry.
    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn expect_geometry(&self, expected: Geometry) -> Result<()> {
        if self.geometry == expected {
            Ok(())
        } else {
            Err(MetricError::GeometryMismatch {
                expected,
                found: self.geometry,
            })
        }
    }

    fn check_len(&self, mesh: &HalfedgeMesh) -> Result<()> {
        if self.lengths.len() != mesh.n_edges() {
            return Err(MetricError::LengthCount {
                expected: mesh.n_edges(),
                found: self.lengths.len(),
            });
        }
        Ok(())
    }

    /// Lengths of face `f`, each opposite the corner with the same index.
    pub fn face_lengths(&self, mesh: &HalfedgeMesh, f: usize) -> [f64; 3] {
        mesh.face_edges(f).map(|e| self.lengths[e])
    }

    /// Replaces a single edge length.
    pub fn set_length(&mut self, e: usize, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(MetricError::InvalidLength { edge: e, value });
        }
        self.lengths[e] = value;
        Ok(())
    }
}

pub fn satisfies_triangle_inequality(l: [f64; 3]) -> bool {
    l[0] + l[1] > l[2] && l[1] + l[2] > l[0] && l[2] + l[0] > l[1]
}

fn clamp_cosine(value: f64, face: usize) -> Result<f64> {
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&value) {
        return Err(MetricError::CosineOutOfRange { face, value });
    }
    Ok(value.clamp(-1.0, 1.0))
}

/// Cosine of the corner opposite `l[0]`.
fn corner_cosine(geometry: Geometry, l: [f64; 3]) -> f64 {
    let [li, lj, lk] = l;
    match geometry {
        Geometry::Euclidean => (lj * lj + lk * lk - li * li) / (2.0 * lj * lk),
        Geometry::Hyperbolic => {
            (lj.cosh() * lk.cosh() - li.cosh()) / (lj.sinh() * lk.sinh())
        }
    }
}

/// Angles of a single triangle with side `l[c]` opposite corner `c`.
/// `face` only labels errors.
pub fn triangle_angles(geometry: Geometry, l: [f64; 3], face: usize) -> Result<[f64; 3]> {
    if !satisfies_triangle_inequality(l) {
        return Err(MetricError::TriangleInequality { face });
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let rotated = [l[c], l[(c + 1) % 3], l[(c + 2) % 3]];
        out[c] = clamp_cosine(corner_cosine(geometry, rotated), face)?.acos();
    }
    Ok(out)
}

pub fn corner_angles(metric: &DiscreteMetric, mesh: &HalfedgeMesh) -> Result<CornerAngles> {
    metric.check_len(mesh)?;
    (0..mesh.n_faces())
        .map(|f| triangle_angles(metric.geometry, metric.face_lengths(mesh, f), f))
        .collect()
}

/// Angle deficit: `2π - Σθ` at interior vertices, `π - Σθ` on the boundary.
pub fn vertex_curvature(angles: &[[f64; 3]], mesh: &HalfedgeMesh) -> CurvatureField {
    let mut sums = vec![0.0; mesh.n_vertices()];
    for (face, theta) in mesh.faces().iter().zip(angles) {
        for c in 0..3 {
            sums[face[c]] += theta[c];
        }
    }
    sums.iter()
        .enumerate()
        .map(|(v, s)| {
            if mesh.is_boundary_vertex(v) {
                PI - s
            } else {
                2.0 * PI - s
            }
        })
        .collect()
}

pub fn curvature(metric: &DiscreteMetric, mesh: &HalfedgeMesh) -> Result<CurvatureField> {
    Ok(vertex_curvature(&corner_angles(metric, mesh)?, mesh))
}

/// Euclidean area by Heron's formula (in its cancellation-free ordering);
/// hyperbolic area as the angle defect `π - Σθ`.
pub fn triangle_area(geometry: Geometry, l: [f64; 3], face: usize) -> Result<f64> {
    if !satisfies_triangle_inequality(l) {
        return Err(MetricError::TriangleInequality { face });
    }
    match geometry {
        Geometry::Euclidean => {
            let mut s = l;
            s.sort_by(|a, b| b.total_cmp(a));
            let [a, b, c] = s;
            let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
            Ok(0.25 * prod.max(0.0).sqrt())
        }
        Geometry::Hyperbolic => {
            let t = triangle_angles(geometry, l, face)?;
            Ok(PI - t[0] - t[1] - t[2])
        }
    }
}

pub fn face_area(metric: &DiscreteMetric, mesh: &HalfedgeMesh, f: usize) -> Result<f64> {
    triangle_area(metric.geometry, metric.face_lengths(mesh, f), f)
}

pub fn total_area(metric: &DiscreteMetric, mesh: &HalfedgeMesh) -> Result<f64> {
    metric.check_len(mesh)?;
    (0..mesh.n_faces()).map(|f| face_area(metric, mesh, f)).sum()
}

/// `Σ K + λ Σ A - 2πχ`, zero up to rounding for any admissible metric.
pub fn gauss_bonnet_residual(metric: &DiscreteMetric, mesh: &HalfedgeMesh) -> Result<f64> {
    let angles = corner_angles(metric, mesh)?;
    let k_total: f64 = vertex_curvature(&angles, mesh).iter().sum();
    let area_term = match metric.geometry {
        Geometry::Euclidean => 0.0,
        Geometry::Hyperbolic => -angles
            .iter()
            .map(|t| PI - t[0] - t[1] - t[2])
            .sum::<f64>(),
    };
    Ok(k_total + area_term - 2.0 * PI * mesh.euler_characteristic() as f64)
}

/// Deformed length of one edge of base length `l` whose endpoints carry
/// conformal factors `ui` and `uj`.
pub fn deform_length(geometry: Geometry, l: f64, ui: f64, uj: f64) -> f64 {
    let scale = (ui + uj).exp();
    match geometry {
        Geometry::Euclidean => scale * l,
        Geometry::Hyperbolic => 2.0 * (scale * (0.5 * l).sinh()).asinh(),
    }
}

/// Base length that `deform_length` maps to `target` under `ui`, `uj`.
pub fn undeform_length(geometry: Geometry, target: f64, ui: f64, uj: f64) -> f64 {
    let scale = (-(ui + uj)).exp();
    match geometry {
        Geometry::Euclidean => scale * target,
        Geometry::Hyperbolic => 2.0 * (scale * (0.5 * target).sinh()).asinh(),
    }
}

/// Conformally deforms `base` by `u`. The result is not checked for the
/// triangle inequality.
pub fn deform_metric(
    mesh: &HalfedgeMesh,
    base: &DiscreteMetric,
    u: &[f64],
) -> Result<DiscreteMetric> {
    base.check_len(mesh)?;
    let lengths = (0..mesh.n_edges())
        .map(|e| {
            let [a, b] = mesh.edge_vertices(e);
            let l = deform_length(base.geometry, base.lengths[e], u[a], u[b]);
            if l.is_finite() && l > 0.0 {
                Ok(l)
            } else {
                Err(MetricError::Overflow { edge: e })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMetric {
        geometry: base.geometry,
        lengths,
    })
}

/// Faces whose lengths violate the strict triangle inequality.
pub fn check_triangle_inequality(metric: &DiscreteMetric, mesh: &HalfedgeMesh) -> Vec<usize> {
    (0..mesh.n_faces())
        .filter(|&f| !satisfies_triangle_inequality(metric.face_lengths(mesh, f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::mesh::{induced_metric, HalfedgeMesh};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn triangle(l: [f64; 3], geometry: Geometry) -> (HalfedgeMesh, DiscreteMetric) {
        let mesh = HalfedgeMesh::from_faces(3, vec![[0, 1, 2]], None).unwrap();
        let lengths = (0..3)
            .map(|e| {
                let [a, b] = mesh.edge_vertices(e);
                l[3 - a - b]
            })
            .collect();
        (mesh, DiscreteMetric::new(geometry, lengths).unwrap())
    }

    // Hyperbolic equilateral angle from the law of cosines, evaluated directly.
    fn hyperbolic_equilateral_angle(l: f64) -> f64 {
        let c = l.cosh();
        (c * (c - 1.0) / (l.sinh() * l.sinh())).acos()
    }

    #[test]
    fn euclidean_angles() {
        let a = triangle_angles(Geometry::Euclidean, [1.0, 1.0, 1.0], 0).unwrap();
        for t in a {
            assert_relative_eq!(t, PI / 3.0, epsilon = 1e-15);
        }
        let a = triangle_angles(Geometry::Euclidean, [5.0, 3.0, 4.0], 0).unwrap();
        assert_relative_eq!(a[0], PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_equilateral_angle_and_area() {
        let oracle = hyperbolic_equilateral_angle(1.0);
        // frozen from a 30-digit evaluation
        assert_relative_eq!(oracle, 0.918_797_872_178_027_4, epsilon = 1e-14);
        let a = triangle_angles(Geometry::Hyperbolic, [1.0; 3], 0).unwrap();
        for t in a {
            assert_relative_eq!(t, oracle, epsilon = 1e-14);
        }
        let area = triangle_area(Geometry::Hyperbolic, [1.0; 3], 0).unwrap();
        assert_relative_eq!(area, PI - 3.0 * oracle, epsilon = 1e-14);
        assert_relative_eq!(area, 0.385_199_037_055_711_1, epsilon = 1e-13);
    }

    #[test]
    fn hyperbolic_area_matches_poincare_disk_quadrature() {
        // Place the equilateral triangle in the disk with one vertex at the
        // origin and integrate the area element 4 / (1 - |z|^2)^2 in polar
        // coordinates up to the geodesic through the other two vertices.
        use num_complex::Complex64;
        let l: f64 = 1.0;
        let r = (l / 2.0).tanh();
        let theta = hyperbolic_equilateral_angle(l);
        let p1 = Complex64::new(r, 0.0);
        let p2 = Complex64::from_polar(r, theta);
        let dist = |p: Complex64, q: Complex64| {
            2.0 * ((p - q) / (Complex64::new(1.0, 0.0) - q.conj() * p))
                .norm()
                .atanh()
        };
        assert_relative_eq!(dist(p1, p2), 1.0, epsilon = 1e-12);

        // geodesic circle center C: |p|^2 - 2 Re(p conj C) + 1 = 0 at p1, p2
        let (a11, a12, b1) = (2.0 * p1.re, 2.0 * p1.im, p1.norm_sqr() + 1.0);
        let (a21, a22, b2) = (2.0 * p2.re, 2.0 * p2.im, p2.norm_sqr() + 1.0);
        let det = a11 * a22 - a12 * a21;
        let center = Complex64::new((b1 * a22 - a12 * b2) / det, (a11 * b2 - b1 * a21) / det);
        let radial = |phi: f64| {
            let proj = (center * Complex64::from_polar(1.0, -phi)).re;
            let t = proj - (proj * proj - 1.0).sqrt();
            2.0 * t * t / (1.0 - t * t)
        };
        let n = 2000;
        let h = theta / n as f64;
        let mut simpson = radial(0.0) + radial(theta);
        for k in 1..n {
            simpson += if k % 2 == 1 { 4.0 } else { 2.0 } * radial(k as f64 * h);
        }
        let quadrature = simpson * h / 3.0;

        let area = triangle_area(Geometry::Hyperbolic, [l; 3], 0).unwrap();
        assert_relative_eq!(area, quadrature, epsilon = 1e-10);
    }

    #[test]
    fn euclidean_areas() {
        assert_relative_eq!(triangle_area(Geometry::Euclidean, [3.0, 4.0, 5.0], 0).unwrap(), 6.0);
        assert_relative_eq!(
            triangle_area(Geometry::Euclidean, [1.0; 3], 0).unwrap(),
            3f64.sqrt() / 4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn triangle_inequality_is_strict() {
        let (mesh, m) = triangle([1.0, 1.0, 1.0], Geometry::Euclidean);
        assert!(check_triangle_inequality(&m, &mesh).is_empty());
        let (mesh, m) = triangle([1.0, 1.0, 3.0], Geometry::Euclidean);
        assert_eq!(check_triangle_inequality(&m, &mesh), vec![0]);
        let (mesh, m) = triangle([1.0, 1.0, 2.0], Geometry::Euclidean);
        assert_eq!(check_triangle_inequality(&m, &mesh), vec![0]);
        assert!(matches!(
            corner_angles(&m, &mesh),
            Err(MetricError::TriangleInequality { face: 0 })
        ));
    }

    #[test]
    fn curvature_examples() {
        // flat interior vertex
        let grid = generators::grid(3, 3, 1.0, 1.0);
        let k = curvature(&induced_metric(&grid).unwrap(), &grid).unwrap();
        assert!(k[4].abs() < 1e-14);
        // straight boundary vertex
        assert!(k[1].abs() < 1e-14);
        // cube corner: three right angles
        let mesh = HalfedgeMesh::from_faces(4, vec![[0, 1, 2], [0, 2, 3], [0, 3, 1]], None).unwrap();
        let angles: Vec<[f64; 3]> = vec![[PI / 2.0, PI / 4.0, PI / 4.0]; 3];
        let k = vertex_curvature(&angles, &mesh);
        assert!(!mesh.is_boundary_vertex(0));
        assert_relative_eq!(k[0], PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_bonnet_on_examples() {
        let tet = generators::tetrahedron();
        let m = induced_metric(&tet).unwrap();
        let k: f64 = curvature(&m, &tet).unwrap().iter().sum();
        assert_relative_eq!(k, 4.0 * PI, epsilon = 1e-12);
        assert!(gauss_bonnet_residual(&m, &tet).unwrap().abs() < 1e-12);

        let grid = generators::grid(5, 5, 1.0, 1.0);
        let m = induced_metric(&grid).unwrap();
        assert!(gauss_bonnet_residual(&m, &grid).unwrap().abs() < 1e-12);
        let h = m.clone().with_geometry(Geometry::Hyperbolic);
        assert!(gauss_bonnet_residual(&h, &grid).unwrap().abs() < 1e-12);
    }

    #[test]
    fn deformation_examples() {
        let (mesh, m) = triangle([1.0, 1.0, 1.0], Geometry::Euclidean);
        assert_eq!(deform_metric(&mesh, &m, &[0.0; 3]).unwrap(), m);
        let u = [2f64.ln(); 3];
        let d = deform_metric(&mesh, &m, &u).unwrap();
        for &l in d.lengths() {
            assert_relative_eq!(l, 4.0, epsilon = 1e-14);
        }
        let h = m.clone().with_geometry(Geometry::Hyperbolic);
        let d = deform_metric(&mesh, &h, &u).unwrap();
        // asinh via its logarithmic form
        let x: f64 = 4.0 * 0.521_095_305_493_747_4;
        let expect = 2.0 * (x + (x * x + 1.0).sqrt()).ln();
        for &l in d.lengths() {
            assert_relative_eq!(l, expect, epsilon = 1e-13);
        }
        // 30-digit evaluation of 2 asinh(4 sinh(1/2))
        assert_relative_eq!(expect, 2.961_494_741_042_273, epsilon = 1e-13);
        let huge = [400.0; 3];
        assert!(matches!(
            deform_metric(&mesh, &m, &huge),
            Err(MetricError::Overflow { .. })
        ));
    }

    #[test]
    fn undeform_inverts_deform() {
        for geometry in [Geometry::Euclidean, Geometry::Hyperbolic] {
            let l = deform_length(geometry, 0.7, 0.3, -0.1);
            assert_relative_eq!(undeform_length(geometry, l, 0.3, -0.1), 0.7, epsilon = 1e-14);
        }
    }

    fn admissible_lengths() -> impl Strategy<Value = [f64; 3]> {
        (0.1f64..3.0, 0.1f64..3.0, 0.05f64..0.95).prop_map(|(a, b, t)| {
            // third side strictly between |a - b| and a + b
            let lo = (a - b).abs();
            let c = lo + t * (a + b - lo);
            [a, b, c]
        })
    }

    proptest! {
        #[test]
        fn euclidean_angle_sum_is_pi(l in admissible_lengths()) {
            let t = triangle_angles(Geometry::Euclidean, l, 0).unwrap();
            prop_assert!((t.iter().sum::<f64>() - PI).abs() < 1e-12);
        }

        #[test]
        fn hyperbolic_angle_sum_below_pi(l in admissible_lengths()) {
            let t = triangle_angles(Geometry::Hyperbolic, l, 0).unwrap();
            prop_assert!(t.iter().sum::<f64>() < PI);
            prop_assert!(t.iter().all(|&x| x > 0.0 && x < PI));
        }

        #[test]
        fn angles_follow_relabeling(l in admissible_lengths(), hyperbolic in any::<bool>()) {
            let g = if hyperbolic { Geometry::Hyperbolic } else { Geometry::Euclidean };
            let t = triangle_angles(g, l, 0).unwrap();
            let r = triangle_angles(g, [l[1], l[2], l[0]], 0).unwrap();
            let s = triangle_angles(g, [l[1], l[0], l[2]], 0).unwrap();
            for c in 0..3 {
                prop_assert!((r[c] - t[(c + 1) % 3]).abs() < 1e-12);
            }
            prop_assert!((s[0] - t[1]).abs() < 1e-12 && (s[1] - t[0]).abs() < 1e-12);
        }

        #[test]
        fn gauss_bonnet_on_random_metrics(
            seed in 0u64..1000,
            hyperbolic in any::<bool>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mesh = generators::height_field(6, 6, 1.0, 1.0, |x, y| {
                0.2 * (3.0 * x).sin() * (2.0 * y).cos()
            });
            let base = induced_metric(&mesh).unwrap();
            let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-0.15..0.15)).collect();
            let g = if hyperbolic { Geometry::Hyperbolic } else { Geometry::Euclidean };
            let m = deform_metric(&mesh, &base.with_geometry(g), &u).unwrap();
            prop_assume!(check_triangle_inequality(&m, &mesh).is_empty());
            let chi = mesh.euler_characteristic() as f64;
            let r = gauss_bonnet_residual(&m, &mesh).unwrap();
            prop_assert!(r.abs() < 1e-9 * (1.0 + (2.0 * PI * chi).abs()));
        }

        #[test]
        fn euclidean_deformation_inverts(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mesh = generators::grid(4, 4, 1.0, 1.0);
            let base = induced_metric(&mesh).unwrap();
            let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            let back = deform_metric(&mesh, &deform_metric(&mesh, &base, &u).unwrap(), &neg).unwrap();
            for (a, b) in back.lengths().iter().zip(base.lengths()) {
                prop_assert!((a - b).abs() <= 1e-12 * b);
            }
        }
    }
}
