//! Intrinsic edge swaps.

use std::f64::consts::PI;

use super::FlowError;
use crate::mesh::HalfedgeMesh;
use crate::metric::{triangle_angles, DiscreteMetric, Geometry};

/// Replaces interior edge `e` by the opposite diagonal of its two faces.
///
/// The quad is unfolded isometrically in the metric's background geometry
/// and the new diagonal measured there, so every other length (and hence the
/// curvature at every vertex) is unchanged. Fails if the quad is not convex.
pub fn edge_swap(
    mesh: &HalfedgeMesh,
    metric: &DiscreteMetric,
    e: usize,
) -> Result<(HalfedgeMesh, DiscreteMetric), FlowError> {
    let h = mesh.edge_halfedge(e);
    let t = mesh.twin(h).ok_or(FlowError::SwapRejected {
        edge: e,
        reason: "boundary edge",
    })?;
    let geometry = metric.geometry();
    let (a, b) = (mesh.origin(h), mesh.dest(h));
    let c = mesh.dest(mesh.next(h));
    let d = mesh.dest(mesh.next(t));
    let len = |p: usize, q: usize| metric.length(mesh.find_edge(p, q).expect("quad edge"));

    // face abc: angles at a and b; face bad likewise
    let (l_ab, l_bc, l_ca, l_ad, l_db) = (len(a, b), len(b, c), len(c, a), len(a, d), len(d, b));
    let left = triangle_angles(geometry, [l_bc, l_ca, l_ab], mesh.face_of(h))?;
    let right = triangle_angles(geometry, [l_ad, l_db, l_ab], mesh.face_of(t))?;
    // left = [at a, at b, at c]; right = [at b, at a, at d]
    let at_a = left[0] + right[1];
    let at_b = left[1] + right[0];
    if at_a >= PI || at_b >= PI {
        return Err(FlowError::SwapRejected {
            edge: e,
            reason: "quad is not convex",
        });
    }
    let new_length = match geometry {
        Geometry::Euclidean => (l_ca * l_ca + l_ad * l_ad - 2.0 * l_ca * l_ad * at_a.cos())
            .max(0.0)
            .sqrt(),
        Geometry::Hyperbolic => (l_ca.cosh() * l_ad.cosh() - l_ca.sinh() * l_ad.sinh() * at_a.cos())
            .max(1.0)
            .acosh(),
    };

    let (flipped, new_edge) = mesh.flip_edge(e).map_err(|err| match err {
        crate::mesh::MeshError::DuplicateEdge(_) => FlowError::SwapRejected {
            edge: e,
            reason: "new diagonal already exists",
        },
        other => FlowError::Mesh(other),
    })?;
    let lengths: Vec<f64> = (0..flipped.n_edges())
        .map(|k| {
            if k == new_edge {
                new_length
            } else {
                let [p, q] = flipped.edge_vertices(k);
                len(p, q)
            }
        })
        .collect();
    let swapped = DiscreteMetric::new(geometry, lengths)?;
    for f in [mesh.face_of(h), mesh.face_of(t)] {
        triangle_angles(geometry, swapped.face_lengths(&flipped, f), f).map_err(|_| {
            FlowError::SwapRejected {
                edge: e,
                reason: "degenerate face after swap",
            }
        })?;
    }
    Ok((flipped, swapped))
}
