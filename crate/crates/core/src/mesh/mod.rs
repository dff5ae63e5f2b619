//! Halfedge triangle meshes.
//!
//! Halfedges are implicit: halfedge `3 * f + c` runs from corner `c` of face
//! `f` to corner `(c + 1) % 3`, so `next`, `prev` and `face` are arithmetic.
//! Only twins, undirected edge ids and the boundary census are stored.

mod cut;
mod obj;

use std::collections::HashMap;

use thiserror::Error;

use crate::metric::{DiscreteMetric, Geometry, MetricError};

pub use cut::{cut_to_disk, slice_along, CutEdge, CutGraph};
pub use obj::{load_obj, load_obj_with_uv, parse_obj, save_obj, write_obj};

#[derive(Error, Debug)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },

    #[error("face {face} is degenerate (repeated vertex)")]
    DegenerateFace { face: usize },

    #[error("edge ({0}, {1}) is shared by more than two faces")]
    NonManifoldEdge(usize, usize),

    #[error("vertex {0} has a non-manifold neighbourhood")]
    NonManifoldVertex(usize),

    #[error("edge ({0}, {1}) is listed in the same direction by two faces")]
    InconsistentOrientation(usize, usize),

    #[error("vertex {0} is not referenced by any face")]
    UnreferencedVertex(usize),

    #[error("mesh must be closed")]
    NotClosed,

    #[error("mesh is not connected")]
    NotConnected,

    #[error("edge {0} is on the boundary")]
    BoundaryEdge(usize),

    #[error("flipping edge {0} would duplicate an existing edge")]
    DuplicateEdge(usize),

    #[error("mesh has no vertex positions")]
    MissingPositions,

    #[error("edge ({0}, {1}) has zero length")]
    ZeroLengthEdge(usize, usize),

    #[error("{0}")]
    Topology(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MeshError>;

/// A connected-or-not, consistently oriented, manifold triangle mesh.
///
/// Immutable once built; surgery (`flip_edge`, slicing) returns a new mesh.
#[derive(Debug, Clone)]
pub struct HalfedgeMesh {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    twins: Vec<Option<usize>>,
    edge_of: Vec<usize>,
    edge_halfedge: Vec<usize>,
    edge_lookup: HashMap<(usize, usize), usize>,
    vertex_out: Vec<usize>,
    is_boundary: Vec<bool>,
    boundary_loops: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 3]>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl HalfedgeMesh {
    /// Builds the halfedge structure from counter-clockwise faces.
    pub fn from_faces(
        n_vertices: usize,
        faces: Vec<[usize; 3]>,
        positions: Option<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        if let Some(p) = &positions {
            if p.len() != n_vertices {
                return Err(MeshError::Topology(format!(
                    "{} positions for {} vertices",
                    p.len(),
                    n_vertices
                )));
            }
        }
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n_vertices {
                    return Err(MeshError::IndexOutOfRange {
                        face: f,
                        vertex: v,
                        count: n_vertices,
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }

        let n_he = 3 * faces.len();
        let origin = |h: usize| faces[h / 3][h % 3];
        let dest = |h: usize| faces[h / 3][(h % 3 + 1) % 3];

        let mut usage: HashMap<(usize, usize), u32> = HashMap::new();
        for h in 0..n_he {
            let count = usage.entry(key(origin(h), dest(h))).or_default();
            *count += 1;
            if *count > 2 {
                return Err(MeshError::NonManifoldEdge(origin(h), dest(h)));
            }
        }

        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(n_he);
        for h in 0..n_he {
            if directed.insert((origin(h), dest(h)), h).is_some() {
                return Err(MeshError::InconsistentOrientation(origin(h), dest(h)));
            }
        }

        let twins: Vec<Option<usize>> = (0..n_he)
            .map(|h| directed.get(&(dest(h), origin(h))).copied())
            .collect();

        let mut edge_of = vec![usize::MAX; n_he];
        let mut edge_halfedge = Vec::new();
        let mut edge_lookup = HashMap::new();
        for h in 0..n_he {
            if edge_of[h] != usize::MAX {
                continue;
            }
            let e = edge_halfedge.len();
            edge_halfedge.push(h);
            edge_of[h] = e;
            if let Some(t) = twins[h] {
                edge_of[t] = e;
            }
            edge_lookup.insert(key(origin(h), dest(h)), e);
        }

        let mut vertex_out = vec![usize::MAX; n_vertices];
        let mut corner_count = vec![0usize; n_vertices];
        for h in 0..n_he {
            let v = origin(h);
            corner_count[v] += 1;
            if vertex_out[v] == usize::MAX {
                vertex_out[v] = h;
            }
        }
        if let Some(v) = vertex_out.iter().position(|&h| h == usize::MAX) {
            return Err(MeshError::UnreferencedVertex(v));
        }

        let mut is_boundary = vec![false; n_vertices];
        let mut boundary_out: Vec<Option<usize>> = vec![None; n_vertices];
        for h in 0..n_he {
            if twins[h].is_none() {
                let v = origin(h);
                if boundary_out[v].is_some() {
                    return Err(MeshError::NonManifoldVertex(v));
                }
                boundary_out[v] = Some(h);
                is_boundary[v] = true;
                vertex_out[v] = h;
            }
        }

        let mut boundary_loops = Vec::new();
        let mut seen = vec![false; n_he];
        for start in 0..n_he {
            if twins[start].is_some() || seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut h = start;
            loop {
                seen[h] = true;
                cycle.push(origin(h));
                h = match boundary_out[dest(h)] {
                    Some(n) => n,
                    None => return Err(MeshError::NonManifoldVertex(dest(h))),
                };
                if h == start {
                    break;
                }
                if seen[h] {
                    return Err(MeshError::NonManifoldVertex(origin(h)));
                }
            }
            boundary_loops.push(cycle);
        }

        let mesh = Self {
            n_vertices,
            faces,
            twins,
            edge_of,
            edge_halfedge,
            edge_lookup,
            vertex_out,
            is_boundary,
            boundary_loops,
            positions,
        };

        // a single fan per vertex
        for v in 0..n_vertices {
            if mesh.vertex_halfedges(v).count() != corner_count[v] {
                return Err(MeshError::NonManifoldVertex(v));
            }
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_halfedge.len()
    }

    pub fn n_halfedges(&self) -> usize {
        3 * self.faces.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn origin(&self, h: usize) -> usize {
        self.faces[h / 3][h % 3]
    }

    pub fn dest(&self, h: usize) -> usize {
        self.faces[h / 3][(h % 3 + 1) % 3]
    }

    pub fn next(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 1) % 3
    }

    pub fn prev(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 2) % 3
    }

    pub fn face_of(&self, h: usize) -> usize {
        h / 3
    }

    /// `None` marks a boundary halfedge.
    pub fn twin(&self, h: usize) -> Option<usize> {
        self.twins[h]
    }

    pub fn edge_of(&self, h: usize) -> usize {
        self.edge_of[h]
    }

    /// A halfedge of edge `e`; for boundary edges, the only one.
    pub fn edge_halfedge(&self, e: usize) -> usize {
        self.edge_halfedge[e]
    }

    pub fn edge_vertices(&self, e: usize) -> [usize; 2] {
        let h = self.edge_halfedge[e];
        [self.origin(h), self.dest(h)]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.twins[self.edge_halfedge[e]].is_none()
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// Edge ids of face `f`, indexed by the corner each edge is opposite to.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        let base = 3 * f;
        [
            self.edge_of[base + 1],
            self.edge_of[base + 2],
            self.edge_of[base],
        ]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }

    /// Boundary loops as vertex cycles, each following its halfedges.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.n_vertices {
            return Err(MeshError::Topology(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.n_vertices
            )));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    /// Outgoing halfedges of `v`, rotating through its fan. Boundary vertices
    /// start at their outgoing boundary halfedge.
    pub fn vertex_halfedges(&self, v: usize) -> VertexHalfedges<'_> {
        VertexHalfedges {
            mesh: self,
            start: self.vertex_out[v],
            current: Some(self.vertex_out[v]),
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    /// Faces reachable from face 0 across interior edges.
    pub fn is_connected(&self) -> bool {
        if self.faces.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.faces.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(f) = stack.pop() {
            for c in 0..3 {
                if let Some(t) = self.twins[3 * f + c] {
                    let g = t / 3;
                    if !seen[g] {
                        seen[g] = true;
                        count += 1;
                        stack.push(g);
                    }
                }
            }
        }
        count == self.faces.len()
    }

    /// Replaces interior edge `e` by the other diagonal of its two faces.
    ///
    /// Face ids are kept; returns the new mesh and the id of the new edge.
    pub fn flip_edge(&self, e: usize) -> Result<(HalfedgeMesh, usize)> {
        let h = self.edge_halfedge[e];
        let t = self.twins[h].ok_or(MeshError::BoundaryEdge(e))?;
        let (a, b) = (self.origin(h), self.dest(h));
        let c = self.dest(self.next(h));
        let d = self.dest(self.next(t));
        if c == d || self.find_edge(c, d).is_some() {
            return Err(MeshError::DuplicateEdge(e));
        }
        let mut faces = self.faces.clone();
        faces[h / 3] = [c, a, d];
        faces[t / 3] = [d, b, c];
        let mesh = HalfedgeMesh::from_faces(self.n_vertices, faces, self.positions.clone())?;
        let new_edge = mesh
            .find_edge(c, d)
            .expect("flipped diagonal is an edge of the rebuilt mesh");
        Ok((mesh, new_edge))
    }
}

pub struct VertexHalfedges<'a> {
    mesh: &'a HalfedgeMesh,
    start: usize,
    current: Option<usize>,
}

impl Iterator for VertexHalfedges<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let h = self.current?;
        self.current = self
            .mesh
            .twin(self.mesh.prev(h))
            .filter(|&n| n != self.start);
        Some(h)
    }
}

/// Euclidean edge lengths measured between 3D vertex positions.
pub fn induced_metric(mesh: &HalfedgeMesh) -> std::result::Result<DiscreteMetric, MeshError> {
    let positions = mesh.positions().ok_or(MeshError::MissingPositions)?;
    let mut lengths = Vec::with_capacity(mesh.n_edges());
    for e in 0..mesh.n_edges() {
        let [a, b] = mesh.edge_vertices(e);
        let (p, q) = (positions[a], positions[b]);
        let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        if len == 0.0 {
            return Err(MeshError::ZeroLengthEdge(a, b));
        }
        lengths.push(len);
    }
    DiscreteMetric::new(Geometry::Euclidean, lengths).map_err(|err: MetricError| {
        MeshError::Topology(format!("induced metric: {err}"))
    })
}
