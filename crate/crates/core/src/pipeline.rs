//! End-to-end pipelines: conformal flattening, quasi-conformal maps and the
//! Beltrami estimate/compose/compare tools built on them.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::beltrami::{
    auxiliary_metric, compose_beltrami, dilation, estimate_beltrami, map_distance, BeltramiError, BeltramiEstimate,
    BeltramiField,
};
use crate::embed::{
    folded_faces, isometry_error, layout_euclidean, layout_hyperbolic, torus_periods, EmbedError, TorusPeriods,
    ISOMETRY_TOLERANCE,
};
use crate::flow::{run_flow, FlowError, FlowOptions, FlowReport};
use crate::mesh::{cut_to_disk, induced_metric, load_obj_with_uv, slice_along, CutGraph, HalfedgeMesh, MeshError};
use crate::metric::{
    check_triangle_inequality, curvature, gauss_bonnet_residual, triangle_angles, DiscreteMetric, Geometry,
    MetricError,
};
use crate::param::{ParamError, Parameterization};

#[derive(Error, Debug)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Flow(#[from] FlowError),

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error(transparent)]
    Beltrami(#[from] BeltramiError),

    #[error(transparent)]
    Param(#[from] ParamError),

    #[error("preset does not fit the mesh: {0}")]
    Preset(String),

    #[error("connectivity mismatch: {0}")]
    Connectivity(String),

    #[error("{0} has no texture coordinates")]
    MissingUv(String),

    #[error("layout deviates from the metric by {0:e} (relative)")]
    Isometry(f64),

    #[error("layout folds {0} face(s)")]
    Folded(usize),
}

impl PipelineError {
    /// Whether the error comes from unreadable input rather than from
    /// input that was read but failed validation.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Mesh(MeshError::Parse { .. } | MeshError::Io(_))
                | PipelineError::Beltrami(BeltramiError::Json(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// How target curvature is distributed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preset {
    /// Four boundary corners at π/2, zero elsewhere.
    Rectangle { corners: [usize; 4] },
    /// Zero inside, constant along each of the two boundary loops.
    Annulus,
    /// Zero inside, `2π/n` at each of the `n` boundary vertices.
    Disk,
    /// Zero everywhere on a closed genus-1 surface.
    ClosedFlat,
    /// Zero everywhere on a closed surface of genus at least 2.
    ClosedHyperbolic,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Rectangle { .. } => "rectangle",
            Preset::Annulus => "annulus",
            Preset::Disk => "disk",
            Preset::ClosedFlat => "closed-flat",
            Preset::ClosedHyperbolic => "closed-hyperbolic",
        }
    }

    /// The only background geometry whose Gauss-Bonnet balance admits the
    /// preset's targets.
    pub fn geometry(&self) -> Geometry {
        match self {
            Preset::ClosedHyperbolic => Geometry::Hyperbolic,
            _ => Geometry::Euclidean,
        }
    }

    fn check_topology(&self, mesh: &HalfedgeMesh) -> Result<()> {
        let chi = mesh.euler_characteristic();
        let loops = mesh.boundary_loops().len();
        let ok = mesh.is_connected()
            && match self {
                Preset::Rectangle { .. } | Preset::Disk => chi == 1 && loops == 1,
                Preset::Annulus => chi == 0 && loops == 2,
                Preset::ClosedFlat => chi == 0 && loops == 0,
                Preset::ClosedHyperbolic => chi < 0 && loops == 0,
            };
        if ok {
            Ok(())
        } else {
            Err(PipelineError::Preset(format!(
                "{} needs a different topology (chi = {chi}, {loops} boundary loops)",
                self.name()
            )))
        }
    }

    /// Per-vertex target curvature. `metric` decides which annulus loop is
    /// the outer one (the longer).
    pub fn target_curvature(&self, mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> Result<Vec<f64>> {
        self.check_topology(mesh)?;
        let mut target = vec![0.0; mesh.n_vertices()];
        match self {
            Preset::Rectangle { corners } => {
                let ordered = order_corners(mesh, corners)?;
                for c in ordered {
                    target[c] = PI / 2.0;
                }
            }
            Preset::Disk => {
                let boundary = &mesh.boundary_loops()[0];
                for &v in boundary {
                    target[v] = 2.0 * PI / boundary.len() as f64;
                }
            }
            Preset::Annulus => {
                let (outer, inner) = annulus_loops(mesh, metric);
                let (outer, inner) = (&mesh.boundary_loops()[outer], &mesh.boundary_loops()[inner]);
                for &v in outer {
                    target[v] = 2.0 * PI / outer.len() as f64;
                }
                for &v in inner {
                    target[v] = -2.0 * PI / inner.len() as f64;
                }
            }
            Preset::ClosedFlat | Preset::ClosedHyperbolic => {}
        }
        Ok(target)
    }
}

impl FromStr for Preset {
    type Err = String;

    /// Parses a preset name; rectangle corners are supplied separately.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rectangle" => Ok(Preset::Rectangle { corners: [0; 4] }),
            "annulus" => Ok(Preset::Annulus),
            "disk" => Ok(Preset::Disk),
            "closed-flat" => Ok(Preset::ClosedFlat),
            "closed-hyperbolic" => Ok(Preset::ClosedHyperbolic),
            other => Err(format!("unknown preset '{other}'")),
        }
    }
}

/// Sorts the corners along the boundary loop, starting from the first one given.
fn order_corners(mesh: &HalfedgeMesh, corners: &[usize; 4]) -> Result<[usize; 4]> {
    let boundary = &mesh.boundary_loops()[0];
    let mut positions = [0usize; 4];
    for (k, &c) in corners.iter().enumerate() {
        positions[k] = boundary
            .iter()
            .position(|&v| v == c)
            .ok_or_else(|| PipelineError::Preset(format!("corner {c} is not a boundary vertex")))?;
        if corners[..k].contains(&c) {
            return Err(PipelineError::Preset(format!("corner {c} given twice")));
        }
    }
    let n = boundary.len();
    let start = positions[0];
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by_key(|&k| (positions[k] + n - start) % n);
    Ok([0, 1, 2, 3].map(|k| corners[order[k]]))
}

fn loop_length(mesh: &HalfedgeMesh, metric: &DiscreteMetric, cycle: &[usize]) -> f64 {
    (0..cycle.len())
        .map(|k| {
            let e = mesh.find_edge(cycle[k], cycle[(k + 1) % cycle.len()]).expect("boundary edge");
            metric.length(e)
        })
        .sum()
}

/// Indices of the (outer, inner) boundary loops.
fn annulus_loops(mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> (usize, usize) {
    let loops = mesh.boundary_loops();
    if loop_length(mesh, metric, &loops[0]) >= loop_length(mesh, metric, &loops[1]) {
        (0, 1)
    } else {
        (1, 0)
    }
}

/// Shortest edge path from the inner to the outer loop through interior
/// vertices; slicing along it turns the annulus into a disk.
fn annulus_slit(mesh: &HalfedgeMesh, inner: &[usize], outer: &[usize]) -> Result<Vec<usize>> {
    let n = mesh.n_vertices();
    let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); n];
    for f in mesh.faces() {
        for c in 0..3 {
            let (a, b) = (f[c], f[(c + 1) % 3]);
            adjacent[a].push(b);
            adjacent[b].push(a);
        }
    }
    let mut is_outer = vec![false; n];
    for &v in outer {
        is_outer[v] = true;
    }
    let mut from = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &v in inner {
        from[v] = v;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let mut neighbors = adjacent[v].clone();
        neighbors.sort_unstable();
        neighbors.dedup();
        for w in neighbors {
            if from[w] != usize::MAX {
                continue;
            }
            from[w] = v;
            if is_outer[w] {
                let mut path = Vec::new();
                let mut x = w;
                while from[x] != x {
                    path.push(mesh.find_edge(x, from[x]).expect("adjacent"));
                    x = from[x];
                }
                return Ok(path);
            }
            if !mesh.is_boundary_vertex(w) {
                queue.push_back(w);
            }
        }
    }
    Err(PipelineError::Preset("annulus boundaries are not connected".into()))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AnnulusReport {
    pub outer_vertices: usize,
    pub inner_vertices: usize,
    pub outer_target: f64,
    pub inner_target: f64,
    /// Mean inner over mean outer radius of the normalized image.
    pub radius_ratio: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PipelineReport {
    pub preset: &'static str,
    pub geometry: Geometry,
    pub flow: FlowReport,
    /// Largest relative edge-length error of the layout.
    pub isometry_error: f64,
    /// Height of the normalized unit-width rectangle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<f64>,
    /// Height of the conformal (μ = 0) rectangle, for quasi-conformal runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformal_module: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<TorusPeriods>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus: Option<AnnulusReport>,
}

/// Output of a flattening: the mesh the layout lives on (sliced open for
/// annuli and closed surfaces), the coordinates and the run summary.
#[derive(Debug, Clone)]
pub struct Flattened {
    pub mesh: HalfedgeMesh,
    pub layout: Parameterization,
    /// Flat metric the layout realises, on `mesh`.
    pub metric: DiscreteMetric,
    pub cut: Option<CutGraph>,
    pub report: PipelineReport,
}

impl Flattened {
    pub fn to_obj(&self) -> String {
        crate::mesh::write_obj(&self.mesh, Some(self.layout.coords()))
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes")
    }
}

fn check_layout(mesh: &HalfedgeMesh, metric: &DiscreteMetric, layout: &Parameterization) -> Result<f64> {
    let error = isometry_error(mesh, metric, layout);
    if !(error <= ISOMETRY_TOLERANCE) {
        return Err(PipelineError::Isometry(error));
    }
    let folded = folded_faces(mesh, layout);
    if !folded.is_empty() {
        return Err(PipelineError::Folded(folded.len()));
    }
    Ok(error)
}

/// Lower-left corner to 0, bottom edge along the positive real axis, unit
/// width. Returns the height.
fn normalize_rectangle(coords: &mut [Complex64], corners: [usize; 4]) -> f64 {
    let origin = coords[corners[0]];
    let bottom = coords[corners[1]] - origin;
    let scale = bottom.conj() / bottom.norm_sqr();
    for z in coords.iter_mut() {
        *z = (*z - origin) * scale;
    }
    (coords[corners[3]] - coords[corners[0]]).norm()
}

fn centroid(coords: &[Complex64], vertices: &[usize]) -> Complex64 {
    vertices.iter().map(|&v| coords[v]).sum::<Complex64>() / vertices.len() as f64
}

fn mean_radius(coords: &[Complex64], vertices: &[usize], center: Complex64) -> f64 {
    vertices.iter().map(|&v| (coords[v] - center).norm()).sum::<f64>() / vertices.len() as f64
}

/// Centers the given loop at the origin with unit mean radius.
fn normalize_round(coords: &mut [Complex64], boundary: &[usize]) {
    let center = centroid(coords, boundary);
    let radius = mean_radius(coords, boundary, center);
    for z in coords.iter_mut() {
        *z = (*z - center) / radius;
    }
}

/// Runs the flow from `base` to the preset's targets and lays the result out.
pub fn flatten_metric(
    mesh: &HalfedgeMesh,
    base: &DiscreteMetric,
    preset: &Preset,
    options: FlowOptions,
) -> Result<Flattened> {
    if base.geometry() != preset.geometry() {
        return Err(PipelineError::Preset(format!(
            "{} targets need {} background geometry",
            preset.name(),
            match preset.geometry() {
                Geometry::Euclidean => "euclidean",
                Geometry::Hyperbolic => "hyperbolic",
            }
        )));
    }
    let target = preset.target_curvature(mesh, base)?;
    let flow = run_flow(mesh, base, &target, options)?;

    let mut report = PipelineReport {
        preset: preset.name(),
        geometry: base.geometry(),
        flow: flow.report.clone(),
        isometry_error: 0.0,
        module: None,
        conformal_module: None,
        max_mu: None,
        periods: None,
        annulus: None,
    };

    let (out_mesh, metric, cut) = match preset {
        Preset::Rectangle { .. } | Preset::Disk => (flow.mesh, flow.metric, None),
        Preset::Annulus => {
            let (outer, inner) = flow_source_loops(mesh, base);
            let slit = annulus_slit(&flow.mesh, &inner, &outer)?;
            let (cut_mesh, cut) = slice_along(&flow.mesh, &slit)?;
            let metric = cut.transfer_metric(&flow.mesh, &flow.metric, &cut_mesh)?;
            (cut_mesh, metric, Some(cut))
        }
        Preset::ClosedFlat | Preset::ClosedHyperbolic => {
            let (cut_mesh, cut) = cut_to_disk(&flow.mesh)?;
            let metric = cut.transfer_metric(&flow.mesh, &flow.metric, &cut_mesh)?;
            (cut_mesh, metric, Some(cut))
        }
    };

    let layout = match metric.geometry() {
        Geometry::Euclidean => layout_euclidean(&out_mesh, &metric)?,
        Geometry::Hyperbolic => layout_hyperbolic(&out_mesh, &metric)?,
    };
    report.isometry_error = check_layout(&out_mesh, &metric, &layout)?;

    let mut coords = layout.coords().to_vec();
    match preset {
        Preset::Rectangle { corners } => {
            let ordered = order_corners(&out_mesh, corners)?;
            report.module = Some(normalize_rectangle(&mut coords, ordered));
        }
        Preset::Disk => normalize_round(&mut coords, &out_mesh.boundary_loops()[0]),
        Preset::Annulus => {
            let cut = cut.as_ref().expect("annulus is sliced");
            let source = &flow_source_loops(mesh, base);
            let outer: Vec<usize> = source.0.iter().map(|&v| cut.copies[v][0]).collect();
            let inner: Vec<usize> = source.1.iter().map(|&v| cut.copies[v][0]).collect();
            normalize_round(&mut coords, &outer);
            let ratio = mean_radius(&coords, &inner, Complex64::new(0.0, 0.0));
            report.annulus = Some(AnnulusReport {
                outer_vertices: outer.len(),
                inner_vertices: inner.len(),
                outer_target: 2.0 * PI / outer.len() as f64,
                inner_target: -2.0 * PI / inner.len() as f64,
                radius_ratio: ratio,
            });
        }
        Preset::ClosedFlat => {
            let cut = cut.as_ref().expect("closed surfaces are sliced");
            report.periods = Some(torus_periods(&out_mesh, cut, &layout)?);
        }
        Preset::ClosedHyperbolic => {}
    }
    let layout = Parameterization::new(layout.geometry(), coords)?;
    Ok(Flattened {
        mesh: out_mesh,
        layout,
        metric,
        cut,
        report,
    })
}

/// (outer, inner) boundary loops of the input annulus.
fn flow_source_loops(mesh: &HalfedgeMesh, metric: &DiscreteMetric) -> (Vec<usize>, Vec<usize>) {
    let (outer, inner) = annulus_loops(mesh, metric);
    let loops = mesh.boundary_loops();
    (loops[outer].clone(), loops[inner].clone())
}

/// Conformal flattening of the surface's induced metric.
pub fn flatten(mesh: &HalfedgeMesh, preset: &Preset, geometry: Geometry, options: FlowOptions) -> Result<Flattened> {
    let base = induced_metric(mesh)?.with_geometry(geometry);
    flatten_metric(mesh, &base, preset, options)
}

/// Quasi-conformal map with Beltrami coefficient `mu`, measured against the
/// conformal flattening. Only presets without cuts are supported.
pub fn qcmap(mesh: &HalfedgeMesh, mu: &BeltramiField, preset: &Preset, options: FlowOptions) -> Result<Flattened> {
    if !matches!(preset, Preset::Rectangle { .. } | Preset::Disk) {
        return Err(PipelineError::Preset(format!(
            "quasi-conformal maps need a disk preset, not {}",
            preset.name()
        )));
    }
    if mu.len() != mesh.n_vertices() {
        return Err(BeltramiError::Count {
            expected: mesh.n_vertices(),
            found: mu.len(),
        }
        .into());
    }
    let induced = induced_metric(mesh)?;
    let conformal = flatten_metric(mesh, &induced, preset, options)?;
    qcmap_from(mesh, &induced, &conformal.layout, mu, preset, options, conformal.report.module)
}

/// Quasi-conformal map relative to a given chart `z` of the surface.
pub fn qcmap_from(
    mesh: &HalfedgeMesh,
    metric: &DiscreteMetric,
    z: &Parameterization,
    mu: &BeltramiField,
    preset: &Preset,
    options: FlowOptions,
    conformal_module: Option<f64>,
) -> Result<Flattened> {
    let aux = auxiliary_metric(mesh, metric, z, mu)?;
    let bad = check_triangle_inequality(&aux, mesh);
    if !bad.is_empty() {
        return Err(FlowError::Inadmissible { faces: bad }.into());
    }
    let mut out = flatten_metric(mesh, &aux, preset, options)?;
    out.report.conformal_module = conformal_module;
    out.report.max_mu = Some(mu.max_modulus());
    Ok(out)
}

/// Beltrami coefficient of `src → dst` on shared connectivity.
pub fn estimate(mesh: &HalfedgeMesh, src: &Parameterization, dst: &Parameterization) -> Result<BeltramiEstimate> {
    Ok(estimate_beltrami(mesh, src, dst)?)
}

/// Per-vertex CSV of `vertex, re, im, arg, abs, dilation`.
pub fn histogram_csv(values: &[Complex64]) -> String {
    let mut out = String::from("vertex,re,im,arg,abs,dilation\n");
    for (v, mu) in values.iter().enumerate() {
        let _ = writeln!(
            out,
            "{v},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            mu.re,
            mu.im,
            mu.arg(),
            mu.norm(),
            dilation(*mu)
        );
    }
    out
}

/// Beltrami coefficient of `g ∘ f`, with `τ` taken from the map `f: src → dst`
/// and `μ_g` given on the same vertex ids as `μ_f`.
pub fn compose(
    mesh: &HalfedgeMesh,
    mu_f: &BeltramiField,
    mu_g: &BeltramiField,
    src: &Parameterization,
    dst: &Parameterization,
) -> Result<BeltramiField> {
    let est = estimate_beltrami(mesh, src, dst)?;
    Ok(compose_beltrami(mu_f, mu_g, &est.vertex_tau)?)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CompareReport {
    pub distance: f64,
    pub max_deviation: f64,
}

/// Normalized L1 distance and largest pointwise gap between two maps of `mesh`.
pub fn compare(mesh: &HalfedgeMesh, a: &Parameterization, b: &Parameterization) -> Result<CompareReport> {
    let metric = induced_metric(mesh)?;
    let distance = map_distance(mesh, &metric, a, b)?;
    let max_deviation = a
        .coords()
        .iter()
        .zip(b.coords())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    Ok(CompareReport {
        distance,
        max_deviation,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub chi: i64,
    pub boundaries: usize,
    /// `None` when some face violates the triangle inequality.
    pub gauss_bonnet_residual: Option<f64>,
    /// Smallest corner angle over admissible faces, in radians.
    pub min_angle: f64,
    /// Faces violating the triangle inequality.
    pub violations: Vec<usize>,
}

/// Topology census and admissibility of the induced metric.
pub fn check(mesh: &HalfedgeMesh) -> Result<CheckReport> {
    let metric = induced_metric(mesh)?;
    let mut violations = check_triangle_inequality(&metric, mesh);
    let mut min_angle = f64::INFINITY;
    for f in 0..mesh.n_faces() {
        match triangle_angles(Geometry::Euclidean, metric.face_lengths(mesh, f), f) {
            Ok(angles) => min_angle = angles.into_iter().fold(min_angle, f64::min),
            Err(_) if !violations.contains(&f) => violations.push(f),
            Err(_) => {}
        }
    }
    violations.sort_unstable();
    let residual = if violations.is_empty() {
        Some(gauss_bonnet_residual(&metric, mesh)?)
    } else {
        None
    };
    Ok(CheckReport {
        chi: mesh.euler_characteristic(),
        boundaries: mesh.boundary_loops().len(),
        gauss_bonnet_residual: residual,
        min_angle,
        violations,
    })
}

/// Loads an OBJ that must carry per-vertex texture coordinates.
pub fn load_parameterized(path: impl AsRef<Path>) -> Result<(HalfedgeMesh, Parameterization)> {
    let path = path.as_ref();
    let (mesh, uv) = load_obj_with_uv(path)?;
    let uv = uv.ok_or_else(|| PipelineError::MissingUv(path.display().to_string()))?;
    Ok((mesh, Parameterization::plane(uv)?))
}

/// Errors unless both meshes have the same vertex count and faces.
pub fn same_connectivity(a: &HalfedgeMesh, b: &HalfedgeMesh) -> Result<()> {
    if a.n_vertices() != b.n_vertices() {
        return Err(PipelineError::Connectivity(format!(
            "{} vs {} vertices",
            a.n_vertices(),
            b.n_vertices()
        )));
    }
    if a.n_faces() != b.n_faces() {
        return Err(PipelineError::Connectivity(format!("{} vs {} faces", a.n_faces(), b.n_faces())));
    }
    if let Some(f) = (0..a.n_faces()).find(|&f| a.face(f) != b.face(f)) {
        return Err(PipelineError::Connectivity(format!("face {f} differs")));
    }
    Ok(())
}

/// Largest `|K̄ − K|` of a metric against a preset, for diagnostics.
pub fn preset_residual(mesh: &HalfedgeMesh, metric: &DiscreteMetric, preset: &Preset) -> Result<f64> {
    let target = preset.target_curvature(mesh, metric)?;
    let k = curvature(metric, mesh)?;
    Ok(target.iter().zip(&k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
