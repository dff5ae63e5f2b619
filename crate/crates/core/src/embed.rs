//! Isometric layout of flat and hyperbolic metrics, Poincaré-disk circles and
//! flat-torus periods.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::mesh::{CutGraph, HalfedgeMesh};
use crate::metric::{corner_angles, vertex_curvature, DiscreteMetric, Geometry, MetricError};
use crate::param::{ParamError, Parameterization};

/// Largest interior curvature a metric may have and still be laid out.
pub const FLATNESS_TOLERANCE: f64 = 1e-6;

/// Relative per-edge length error a layout must stay within.
pub const ISOMETRY_TOLERANCE: f64 = 1e-7;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EmbedError {
    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Param(#[from] ParamError),

    #[error("mesh is not a topological disk (chi = {chi}, {loops} boundary loops)")]
    NotDisk { chi: i64, loops: usize },

    #[error("interior vertex {vertex} has curvature {curvature:e}")]
    NotFlat { vertex: usize, curvature: f64 },

    #[error("circles do not intersect while placing face {face}")]
    Intersection { face: usize },

    #[error("vertex {vertex} escaped the unit disk")]
    EscapedDisk { vertex: usize },

    #[error("invalid hyperbolic circle (center {center}, radius {radius})")]
    InvalidCircle { center: Complex64, radius: f64 },

    #[error("source surface has Euler characteristic {euler}, not a torus")]
    LoopCount { euler: i64 },

    #[error("translation along cut path {path} varies by {deviation:e}")]
    NonConstantTranslation { path: usize, deviation: f64 },

    #[error("cut translations do not span the plane")]
    DependentPeriods,
}

/// Hyperbolic distance in the Poincaré disk.
pub fn poincare_distance(p: Complex64, q: Complex64) -> f64 {
    let ratio = ((p - q) / (Complex64::new(1.0, 0.0) - q.conj() * p)).norm();
    2.0 * ratio.min(1.0).atanh()
}

/// The disk automorphism `e^{iθ} (z − z0) / (1 − conj(z0) z)`.
pub fn mobius(z: Complex64, theta: f64, z0: Complex64) -> Complex64 {
    Complex64::from_polar(1.0, theta) * (z - z0) / (Complex64::new(1.0, 0.0) - z0.conj() * z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareCircle {
    center: Complex64,
    radius: f64,
}

impl PoincareCircle {
    pub fn new(center: Complex64, radius: f64) -> Result<Self, EmbedError> {
        let finite = center.re.is_finite() && center.im.is_finite();
        if !finite || center.norm_sqr() >= 1.0 || !(radius.is_finite() && radius > 0.0) {
            return Err(EmbedError::InvalidCircle { center, radius });
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// The Euclidean circle `(C, R)` traced by a hyperbolic circle.
pub fn hyperbolic_circle_to_euclidean(circle: &PoincareCircle) -> (Complex64, f64) {
    let c = circle.center;
    let mu = (circle.radius / 2.0).tanh();
    let mu2 = mu * mu;
    let c2 = c.norm_sqr();
    let denom = 1.0 - mu2 * c2;
    ((1.0 - mu2) / denom * c, mu * (1.0 - c2) / denom)
}

fn require_disk(mesh: &HalfedgeMesh) -> Result<(), EmbedError> {
    let chi = mesh.euler_characteristic();
    let loops = mesh.boundary_loops().len();
    if chi != 1 || loops != 1 || !mesh.is_connected() {
        return Err(EmbedError::NotDisk { chi, loops });
    }
    Ok(())
}

fn require_flat(mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> Result<(), EmbedError> {
    let angles = corner_angles(metric, mesh)?;
    let k = vertex_curvature(&angles, mesh);
    for v in 0..mesh.n_vertices() {
        if !mesh.is_boundary_vertex(v) && k[v].abs() >= FLATNESS_TOLERANCE {
            return Err(EmbedError::NotFlat {
                vertex: v,
                curvature: k[v],
            });
        }
    }
    Ok(())
}

/// Seed face and breadth-first order shared by both layouts. `place` gets the
/// face being unfolded, the already placed base `(b, a)` ordered so the new
/// vertex `w` lies on their left, and must return its coordinate.
fn breadth_first<F>(mesh: &HalfedgeMesh, seed: [Complex64; 3], mut place: F) -> Result<Vec<Complex64>, EmbedError>
where
    F: FnMut(usize, usize, usize, usize, &[Option<Complex64>]) -> Result<Complex64, EmbedError>,
{
    let mut z: Vec<Option<Complex64>> = vec![None; mesh.n_vertices()];
    for (v, p) in mesh.face(0).into_iter().zip(seed) {
        z[v] = Some(p);
    }
    let mut visited = vec![false; mesh.n_faces()];
    visited[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(f) = queue.pop_front() {
        for c in 0..3 {
            let Some(t) = mesh.twin(3 * f + c) else { continue };
            let g = mesh.face_of(t);
            if visited[g] {
                continue;
            }
            visited[g] = true;
            let (b, a) = (mesh.origin(t), mesh.dest(t));
            let w = mesh.dest(mesh.next(t));
            if z[w].is_none() {
                z[w] = Some(place(g, b, a, w, &z)?);
            }
            queue.push_back(g);
        }
    }
    Ok(z.into_iter().map(|p| p.expect("connected disk")).collect())
}

fn angle_at(angles: &[[f64; 3]], mesh: &HalfedgeMesh, f: usize, v: usize) -> f64 {
    let c = mesh.face(f).iter().position(|&x| x == v).expect("vertex of face");
    angles[f][c]
}

/// Unfolds a flat metric on a disk into the plane.
pub fn layout_euclidean(mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> Result<Parameterization, EmbedError> {
    metric.expect_geometry(Geometry::Euclidean)?;
    require_disk(mesh)?;
    require_flat(mesh, metric)?;
    let angles = corner_angles(metric, mesh)?;
    let len = |p: usize, q: usize| metric.length(mesh.find_edge(p, q).expect("face edge"));

    let [_, l1, l2] = metric.face_lengths(mesh, 0);
    let seed = [
        Complex64::new(0.0, 0.0),
        Complex64::new(l2, 0.0),
        Complex64::from_polar(l1, angles[0][0]),
    ];
    let coords = breadth_first(mesh, seed, |g, b, a, w, z| {
        let (p, q) = (z[b].unwrap(), z[a].unwrap());
        let (r_b, r_a) = (len(b, w), len(a, w));
        let base = q - p;
        let d = base.norm();
        let dir = base / d;
        let x = (r_b * r_b - r_a * r_a + d * d) / (2.0 * d);
        let y2 = r_b * r_b - x * x;
        if y2 > 1e-6 * r_b * r_b {
            Ok(p + Complex64::new(x, y2.sqrt()) * dir)
        } else if r_b > 0.0 && d > 0.0 {
            Ok(p + Complex64::from_polar(r_b, angle_at(&angles, mesh, g, b)) * dir)
        } else {
            Err(EmbedError::Intersection { face: g })
        }
    })?;
    Ok(Parameterization::plane(coords)?)
}

/// Unfolds a hyperbolic metric on a disk into the Poincaré disk.
pub fn layout_hyperbolic(mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> Result<Parameterization, EmbedError> {
    metric.expect_geometry(Geometry::Hyperbolic)?;
    require_disk(mesh)?;
    require_flat(mesh, metric)?;
    let angles = corner_angles(metric, mesh)?;
    let len = |p: usize, q: usize| metric.length(mesh.find_edge(p, q).expect("face edge"));

    let [_, l1, l2] = metric.face_lengths(mesh, 0);
    let seed = [
        Complex64::new(0.0, 0.0),
        Complex64::new((l2 / 2.0).tanh(), 0.0),
        Complex64::from_polar((l1 / 2.0).tanh(), angles[0][0]),
    ];
    let one = Complex64::new(1.0, 0.0);
    let coords = breadth_first(mesh, seed, |g, b, a, w, z| {
        let (p, q) = (z[b].unwrap(), z[a].unwrap());
        // chart sending p to 0 and q to the positive real axis
        let tq = (q - p) / (one - p.conj() * q);
        let rot = tq.conj() / tq.norm();
        let to_chart = |x: Complex64| rot * (x - p) / (one - p.conj() * x);
        let from_chart = |y: Complex64| {
            let x = y / rot;
            (x + p) / (one + p.conj() * x)
        };

        let (r_b, r_a) = (len(b, w), len(a, w));
        let (c1, s1) = hyperbolic_circle_to_euclidean(&PoincareCircle::new(p, r_b)?);
        let (c2, s2) = hyperbolic_circle_to_euclidean(&PoincareCircle::new(q, r_a)?);
        let base = c2 - c1;
        let d = base.norm();
        let x = (s1 * s1 - s2 * s2 + d * d) / (2.0 * d);
        let y2 = s1 * s1 - x * x;
        let placed = if d > 0.0 && y2 > 1e-6 * s1 * s1 {
            let dir = base / d;
            let y = y2.sqrt();
            let hi = c1 + Complex64::new(x, y) * dir;
            let lo = c1 + Complex64::new(x, -y) * dir;
            if to_chart(hi).im > to_chart(lo).im {
                hi
            } else {
                lo
            }
        } else {
            let theta = angle_at(&angles, mesh, g, b);
            from_chart(Complex64::from_polar((r_b / 2.0).tanh(), theta))
        };
        if !(placed.norm_sqr() < 1.0) {
            return Err(EmbedError::EscapedDisk { vertex: w });
        }
        Ok(placed)
    })?;
    Ok(Parameterization::new(Geometry::Hyperbolic, coords)?)
}

/// Largest relative deviation between embedded and metric edge lengths.
pub fn isometry_error(mesh: &HalfedgeMesh, metric: &DiscreteMetric, layout: &Parameterization) -> f64 {
    (0..mesh.n_edges())
        .map(|e| {
            let [a, b] = mesh.edge_vertices(e);
            let embedded = match layout.geometry() {
                Geometry::Euclidean => (layout[a] - layout[b]).norm(),
                Geometry::Hyperbolic => poincare_distance(layout[a], layout[b]),
            };
            ((embedded - metric.length(e)) / metric.length(e)).abs()
        })
        .fold(0.0, f64::max)
}

/// Edge lengths of a planar layout, as a flat metric.
pub fn planar_metric(mesh: &HalfedgeMesh, layout: &Parameterization) -> Result<DiscreteMetric, EmbedError> {
    layout.expect_len(mesh.n_vertices())?;
    let lengths = (0..mesh.n_edges())
        .map(|e| {
            let [a, b] = mesh.edge_vertices(e);
            (layout[a] - layout[b]).norm()
        })
        .collect();
    Ok(DiscreteMetric::new(Geometry::Euclidean, lengths)?)
}

/// Faces whose image is not positively oriented.
pub fn folded_faces(mesh: &HalfedgeMesh, layout: &Parameterization) -> Vec<usize> {
    (0..mesh.n_faces())
        .filter(|&f| {
            let [i, j, k] = mesh.face(f);
            let (mut zi, mut zj, mut zk) = (layout[i], layout[j], layout[k]);
            if layout.geometry() == Geometry::Hyperbolic {
                // orientation is read off in a chart centered at the first corner
                zj = mobius(zj, 0.0, zi);
                zk = mobius(zk, 0.0, zi);
                zi = Complex64::new(0.0, 0.0);
            }
            ((zj - zi).conj() * (zk - zi)).im <= 0.0
        })
        .collect()
}

/// Generators of the deck lattice of a flat torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPeriods {
    pub za: Complex64,
    pub zb: Complex64,
}

impl TorusPeriods {
    /// Ratio of the longer to the shorter period.
    pub fn ratio(&self) -> f64 {
        let (a, b) = (self.za.norm(), self.zb.norm());
        a.max(b) / a.min(b)
    }

    /// `Im(conj(za) zb)`, the signed lattice cell area.
    pub fn cell_area(&self) -> f64 {
        (self.za.conj() * self.zb).im
    }
}

#[derive(Serialize, Deserialize)]
struct PeriodsJson {
    za: [f64; 2],
    zb: [f64; 2],
}

impl Serialize for TorusPeriods {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PeriodsJson {
            za: [self.za.re, self.za.im],
            zb: [self.zb.re, self.zb.im],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPeriods {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let p = PeriodsJson::deserialize(d)?;
        Ok(Self {
            za: Complex64::new(p.za[0], p.za[1]),
            zb: Complex64::new(p.zb[0], p.zb[1]),
        })
    }
}

/// Splits the cut graph into paths between branch vertices (degree ≠ 2).
/// Each path is a list of `(cut edge index, forward)` steps.
fn cut_paths(cut: &CutGraph) -> Vec<Vec<(usize, bool)>> {
    let n = cut.copies.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in cut.edges.iter().enumerate() {
        incident[e.vertices[0]].push(k);
        incident[e.vertices[1]].push(k);
    }
    let mut used = vec![false; cut.edges.len()];
    let mut paths = Vec::new();
    let walk = |start: usize, first: usize, used: &mut Vec<bool>| {
        let mut path = Vec::new();
        let (mut v, mut k) = (start, first);
        loop {
            used[k] = true;
            let e = cut.edges[k];
            let forward = e.vertices[0] == v;
            path.push((k, forward));
            v = if forward { e.vertices[1] } else { e.vertices[0] };
            if incident[v].len() != 2 {
                break;
            }
            match incident[v].iter().find(|&&x| !used[x]) {
                Some(&next) => k = next,
                None => break,
            }
        }
        path
    };
    for v in (0..n).filter(|&v| !incident[v].is_empty() && incident[v].len() != 2) {
        for &k in &incident[v] {
            if !used[k] {
                paths.push(walk(v, k, &mut used));
            }
        }
    }
    // closed loops without branch points
    for k in 0..cut.edges.len() {
        if !used[k] {
            let v = cut.edges[k].vertices[0];
            paths.push(walk(v, k, &mut used));
        }
    }
    paths
}

fn gauss_reduce(mut a: Complex64, mut b: Complex64) -> (Complex64, Complex64) {
    if b.norm_sqr() < a.norm_sqr() {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        let m = ((a.conj() * b).re / a.norm_sqr()).round();
        b -= m * a;
        if b.norm_sqr() < a.norm_sqr() {
            std::mem::swap(&mut a, &mut b);
        } else {
            return (a, b);
        }
    }
}

/// Reads the deck translations off a planar layout of a sliced torus.
///
/// Along each cut path the two sides must differ by one constant
/// translation. The translations are reduced to a Gauss-reduced basis,
/// shorter vector first, with positive orientation.
pub fn torus_periods(
    cut_mesh: &HalfedgeMesh,
    cut: &CutGraph,
    layout: &Parameterization,
) -> Result<TorusPeriods, EmbedError> {
    if cut.source_euler != 0 {
        return Err(EmbedError::LoopCount {
            euler: cut.source_euler,
        });
    }
    layout.expect_len(cut_mesh.n_vertices())?;

    let mut translations = Vec::new();
    for (index, path) in cut_paths(cut).iter().enumerate() {
        let mut samples = Vec::new();
        let mut scale: f64 = 0.0;
        for &(k, forward) in path {
            let e = cut.edges[k];
            let Some(right) = e.right_face else { continue };
            // sides relative to the walking direction
            let (left, right) = if forward { (e.left_face, right) } else { (right, e.left_face) };
            for v in e.vertices {
                let l = cut.copy_in_face(cut_mesh, left, v).expect("left copy");
                let r = cut.copy_in_face(cut_mesh, right, v).expect("right copy");
                samples.push(layout[r] - layout[l]);
            }
            let [a, b] = e.vertices;
            let (la, lb) = (
                cut.copy_in_face(cut_mesh, left, a).unwrap(),
                cut.copy_in_face(cut_mesh, left, b).unwrap(),
            );
            scale += (layout[la] - layout[lb]).norm();
        }
        if samples.is_empty() {
            continue;
        }
        let mean = samples.iter().sum::<Complex64>() / samples.len() as f64;
        let deviation = samples.iter().map(|s| (s - mean).norm()).fold(0.0, f64::max);
        if deviation > 1e-6 * scale.max(mean.norm()) {
            return Err(EmbedError::NonConstantTranslation { path: index, deviation });
        }
        translations.push(mean);
    }

    let mut best: Option<(f64, Complex64, Complex64)> = None;
    for (i, &a) in translations.iter().enumerate() {
        for &b in &translations[i + 1..] {
            let area = (a.conj() * b).im.abs();
            if best.is_none_or(|(m, _, _)| area > m) {
                best = Some((area, a, b));
            }
        }
    }
    let scale = translations.iter().map(|t| t.norm_sqr()).fold(0.0, f64::max);
    let Some((area, a, b)) = best else {
        return Err(EmbedError::DependentPeriods);
    };
    if area <= 1e-9 * scale {
        return Err(EmbedError::DependentPeriods);
    }
    let (za, mut zb) = gauss_reduce(a, b);
    if (za.conj() * zb).im < 0.0 {
        zb = -zb;
    }
    Ok(TorusPeriods { za, zb })
}
