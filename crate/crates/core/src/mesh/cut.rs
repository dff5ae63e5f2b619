//! Slicing meshes open along edge sets.

use std::collections::VecDeque;

use crate::metric::{DiscreteMetric, MetricError};

use super::{HalfedgeMesh, MeshError, Result};

/// One sliced edge, recorded in terms of the mesh it was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutEdge {
    /// Endpoints, ordered as the halfedge of `left_face`.
    pub vertices: [usize; 2],
    pub left_face: usize,
    /// `None` only when the sliced edge was already on the boundary.
    pub right_face: Option<usize>,
}

/// The edges a mesh was sliced along and the vertex duplication it caused.
/// Face ids are shared between the source and the sliced mesh.
#[derive(Debug, Clone)]
pub struct CutGraph {
    pub edges: Vec<CutEdge>,
    /// Source vertex id to its copies in the sliced mesh; the first copy
    /// keeps the source id.
    pub copies: Vec<Vec<usize>>,
    /// Sliced-mesh vertex id to source vertex id.
    pub original: Vec<usize>,
    /// Euler characteristic of the source mesh.
    pub source_euler: i64,
}

impl CutGraph {
    /// Copies per-vertex values onto every duplicate.
    pub fn to_cut<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.original.iter().map(|&v| values[v].clone()).collect()
    }

    /// Pulls per-vertex values back, reading the first copy of each vertex.
    pub fn from_cut<T: Clone>(&self, values: &[T]) -> Vec<T> {
        self.copies.iter().map(|c| values[c[0]].clone()).collect()
    }

    /// Copy of source vertex `v` used by face `f` of the sliced mesh.
    pub fn copy_in_face(&self, cut_mesh: &HalfedgeMesh, f: usize, v: usize) -> Option<usize> {
        cut_mesh
            .face(f)
            .into_iter()
            .find(|&w| self.original[w] == v)
    }

    /// Carries edge lengths from the source mesh onto the sliced mesh.
    pub fn transfer_metric(
        &self,
        source: &HalfedgeMesh,
        metric: &DiscreteMetric,
        cut_mesh: &HalfedgeMesh,
    ) -> std::result::Result<DiscreteMetric, MetricError> {
        let lengths = (0..cut_mesh.n_edges())
            .map(|e| {
                let [a, b] = cut_mesh.edge_vertices(e);
                let src = source
                    .find_edge(self.original[a], self.original[b])
                    .expect("every sliced edge has a source edge");
                metric.length(src)
            })
            .collect();
        DiscreteMetric::new(metric.geometry(), lengths)
    }

    /// Number of vertices in the sliced mesh with cut-graph degree `d`,
    /// counted on the source vertices.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let mut degree = vec![0usize; self.copies.len()];
        for e in &self.edges {
            degree[e.vertices[0]] += 1;
            degree[e.vertices[1]] += 1;
        }
        let max = degree.iter().copied().max().unwrap_or(0);
        let mut hist = vec![0usize; max + 1];
        for d in degree {
            hist[d] += 1;
        }
        hist
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Slices `mesh` open along `cut_edges`. A vertex gets one copy per sector
/// of its fan delimited by sliced edges.
pub fn slice_along(mesh: &HalfedgeMesh, cut_edges: &[usize]) -> Result<(HalfedgeMesh, CutGraph)> {
    let mut is_cut = vec![false; mesh.n_edges()];
    for &e in cut_edges {
        is_cut[e] = true;
    }

    // corner h sits at origin(h); glue corners across uncut interior edges
    let n_he = mesh.n_halfedges();
    let mut parent: Vec<usize> = (0..n_he).collect();
    for h in 0..n_he {
        if is_cut[mesh.edge_of(h)] {
            continue;
        }
        if let Some(t) = mesh.twin(h) {
            union(&mut parent, h, mesh.next(t));
            union(&mut parent, mesh.next(h), t);
        }
    }

    let n = mesh.n_vertices();
    let mut copies: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut root_vertex = vec![usize::MAX; n_he];
    let mut original: Vec<usize> = (0..n).collect();
    let mut next_id = n;
    for v in 0..n {
        // sectors ordered by their smallest corner
        let mut roots: Vec<usize> = mesh
            .vertex_halfedges(v)
            .map(|h| find(&mut parent, h))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        for (k, root) in roots.into_iter().enumerate() {
            let id = if k == 0 {
                v
            } else {
                next_id += 1;
                original.push(v);
                next_id - 1
            };
            root_vertex[root] = id;
            copies[v].push(id);
        }
    }

    let faces: Vec<[usize; 3]> = (0..mesh.n_faces())
        .map(|f| {
            let mut face = [0; 3];
            for (c, slot) in face.iter_mut().enumerate() {
                let root = find(&mut parent, 3 * f + c);
                *slot = root_vertex[root];
            }
            face
        })
        .collect();
    let positions = mesh
        .positions()
        .map(|p| original.iter().map(|&v| p[v]).collect());
    let cut_mesh = HalfedgeMesh::from_faces(original.len(), faces, positions)?;

    let mut edges: Vec<CutEdge> = cut_edges
        .iter()
        .map(|&e| {
            let h = mesh.edge_halfedge(e);
            CutEdge {
                vertices: [mesh.origin(h), mesh.dest(h)],
                left_face: mesh.face_of(h),
                right_face: mesh.twin(h).map(|t| mesh.face_of(t)),
            }
        })
        .collect();
    edges.sort_by_key(|e| (e.left_face, e.vertices));

    let graph = CutGraph {
        edges,
        copies,
        original,
        source_euler: mesh.euler_characteristic(),
    };
    Ok((cut_mesh, graph))
}

/// Cuts a closed, connected mesh into a topological disk.
///
/// A breadth-first spanning tree of the dual graph is grown from face 0; the
/// primal edges it does not cross form the cut graph, which is then pruned
/// of degree-1 vertices. On a sphere pruning would remove everything, so it
/// stops at a two-edge slit.
pub fn cut_to_disk(mesh: &HalfedgeMesh) -> Result<(HalfedgeMesh, CutGraph)> {
    if !mesh.is_closed() {
        return Err(MeshError::NotClosed);
    }
    if !mesh.is_connected() {
        return Err(MeshError::NotConnected);
    }

    let mut crossed = vec![false; mesh.n_edges()];
    let mut visited = vec![false; mesh.n_faces()];
    let mut queue = VecDeque::from([0usize]);
    visited[0] = true;
    while let Some(f) = queue.pop_front() {
        for c in 0..3 {
            let h = 3 * f + c;
            let t = mesh.twin(h).expect("closed mesh");
            let g = mesh.face_of(t);
            if !visited[g] {
                visited[g] = true;
                crossed[mesh.edge_of(h)] = true;
                queue.push_back(g);
            }
        }
    }

    let mut in_cut: Vec<bool> = crossed.iter().map(|&c| !c).collect();
    let mut remaining = in_cut.iter().filter(|&&c| c).count();
    let mut degree = vec![0usize; mesh.n_vertices()];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
    for e in (0..mesh.n_edges()).filter(|&e| in_cut[e]) {
        for v in mesh.edge_vertices(e) {
            degree[v] += 1;
            incident[v].push(e);
        }
    }
    let mut leaves: VecDeque<usize> = (0..mesh.n_vertices()).filter(|&v| degree[v] == 1).collect();
    while remaining > 2 {
        let Some(v) = leaves.pop_front() else { break };
        if degree[v] != 1 {
            continue;
        }
        let e = *incident[v]
            .iter()
            .find(|&&e| in_cut[e])
            .expect("leaf has one live edge");
        in_cut[e] = false;
        remaining -= 1;
        for w in mesh.edge_vertices(e) {
            degree[w] -= 1;
            if degree[w] == 1 {
                leaves.push_back(w);
            }
        }
    }

    let cut: Vec<usize> = (0..mesh.n_edges()).filter(|&e| in_cut[e]).collect();
    let (cut_mesh, graph) = slice_along(mesh, &cut)?;
    if cut_mesh.euler_characteristic() != 1 || cut_mesh.boundary_loops().len() != 1 {
        return Err(MeshError::Topology(format!(
            "cut produced chi = {} with {} boundary loops",
            cut_mesh.euler_characteristic(),
            cut_mesh.boundary_loops().len()
        )));
    }
    Ok((cut_mesh, graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn tetrahedron_cuts_to_disk() {
        let (cut, graph) = cut_to_disk(&generators::tetrahedron()).unwrap();
        assert_eq!(cut.euler_characteristic(), 1);
        assert_eq!(cut.boundary_loops().len(), 1);
        assert_eq!(graph.edges.len(), 2);
        assert_eq!(graph.source_euler, 2);
    }

    #[test]
    fn torus_cut_graph_is_wedge_or_theta() {
        let mesh = generators::torus(16, 16, 2.0, 0.7);
        let (cut, graph) = cut_to_disk(&mesh).unwrap();
        assert_eq!(cut.euler_characteristic(), 1);
        assert_eq!(cut.boundary_loops().len(), 1);
        // a cut graph of a genus-g surface has V - E = 1 - 2g
        let vertices = graph.degree_histogram().iter().skip(1).sum::<usize>() as i64;
        assert_eq!(vertices - graph.edges.len() as i64, -1);
    }

    #[test]
    fn open_mesh_is_rejected() {
        assert!(matches!(
            cut_to_disk(&generators::grid(3, 3, 1.0, 1.0)),
            Err(MeshError::NotClosed)
        ));
    }

    #[test]
    fn duplication_maps_are_consistent() {
        let mesh = generators::voxel_plate(2, 1);
        let (cut, graph) = cut_to_disk(&mesh).unwrap();
        assert_eq!(graph.original.len(), cut.n_vertices());
        for (v, copies) in graph.copies.iter().enumerate() {
            assert_eq!(copies[0], v);
            for &c in copies {
                assert_eq!(graph.original[c], v);
            }
        }
        let values: Vec<usize> = (0..mesh.n_vertices()).collect();
        assert_eq!(graph.from_cut(&graph.to_cut(&values)), values);
        for f in 0..mesh.n_faces() {
            let mapped = cut.face(f).map(|w| graph.original[w]);
            assert_eq!(mapped, mesh.face(f));
        }
    }

    #[test]
    fn slicing_a_path_in_a_grid_interior() {
        let mesh = generators::grid(5, 5, 1.0, 1.0);
        let path = [mesh.find_edge(6, 7).unwrap(), mesh.find_edge(7, 8).unwrap()];
        let (cut, graph) = slice_along(&mesh, &path).unwrap();
        // only the middle vertex of a path strictly inside is duplicated
        assert_eq!(cut.n_vertices(), mesh.n_vertices() + 1);
        assert_eq!(graph.copies[7].len(), 2);
        assert_eq!(cut.boundary_loops().len(), 2);
    }
}
