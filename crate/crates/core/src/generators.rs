//! Deterministic structured meshes used by tests, benchmarks and the CLI
//! examples: grids, height fields, tori, annuli and voxel plates with holes.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::HalfedgeMesh;
use crate::metric::{DiscreteMetric, Geometry};

/// `nx` by `ny` vertices spanning `[0, width] x [0, height]` in the z = 0
/// plane. Every quad is split along its (i, j) to (i + 1, j + 1) diagonal.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> HalfedgeMesh {
    height_field(nx, ny, width, height, |_, _| 0.0)
}

/// Grid lifted by `z = f(x, y)`.
pub fn height_field(
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    f: impl Fn(f64, f64) -> f64,
) -> HalfedgeMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut positions = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = width * i as f64 / (nx - 1) as f64;
            let y = height * j as f64 / (ny - 1) as f64;
            positions.push([x, y, f(x, y)]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    HalfedgeMesh::from_faces(nx * ny, faces, Some(positions)).expect("grid is a valid mesh")
}

/// Vertex ids of the four grid corners, counter-clockwise from the origin.
pub fn grid_corners(nx: usize, ny: usize) -> [usize; 4] {
    [0, nx - 1, nx * ny - 1, nx * (ny - 1)]
}

pub fn tetrahedron() -> HalfedgeMesh {
    let positions = vec![
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let faces = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
    HalfedgeMesh::from_faces(4, faces, Some(positions)).expect("tetrahedron is a valid mesh")
}

fn torus_faces(nu: usize, nv: usize) -> Vec<[usize; 3]> {
    let id = |i: usize, j: usize| (j % nv) * nu + (i % nu);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    faces
}

/// Torus of revolution with `nu` samples around the major circle and `nv`
/// around the tube.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> HalfedgeMesh {
    assert!(nu >= 3 && nv >= 3);
    let mut positions = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        let v = 2.0 * PI * j as f64 / nv as f64;
        for i in 0..nu {
            let u = 2.0 * PI * i as f64 / nu as f64;
            let ring = major + minor * v.cos();
            positions.push([ring * u.cos(), ring * u.sin(), minor * v.sin()]);
        }
    }
    HalfedgeMesh::from_faces(nu * nv, torus_faces(nu, nv), Some(positions))
        .expect("torus is a valid mesh")
}

/// A `nu` by `nv` grid with opposite sides identified, carrying the
/// intrinsic flat metric of the `width` by `height` rectangle it came from.
/// Positions are those of a torus of revolution and only serve output.
pub fn flat_torus(nu: usize, nv: usize, width: f64, height: f64) -> (HalfedgeMesh, DiscreteMetric) {
    let mesh = torus(nu, nv, 2.0, 0.7);
    let dx = width / nu as f64;
    let dy = height / nv as f64;
    let lengths = (0..mesh.n_edges())
        .map(|e| {
            let [a, b] = mesh.edge_vertices(e);
            let (ia, ja) = (a % nu, a / nu);
            let (ib, jb) = (b % nu, b / nu);
            let step_u = if ia == ib { 0.0 } else { dx };
            let step_v = if ja == jb { 0.0 } else { dy };
            step_u.hypot(step_v)
        })
        .collect();
    let metric = DiscreteMetric::new(Geometry::Euclidean, lengths).expect("positive lengths");
    (mesh, metric)
}

/// Planar annulus between radii `inner` and `outer`, with `n_radial` rings of
/// `n_angular` vertices each.
pub fn annulus(n_radial: usize, n_angular: usize, inner: f64, outer: f64) -> HalfedgeMesh {
    assert!(n_radial >= 2 && n_angular >= 3);
    let mut positions = Vec::with_capacity(n_radial * n_angular);
    for j in 0..n_radial {
        let r = inner + (outer - inner) * j as f64 / (n_radial - 1) as f64;
        for i in 0..n_angular {
            let t = 2.0 * PI * i as f64 / n_angular as f64;
            positions.push([r * t.cos(), r * t.sin(), 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * n_angular + (i % n_angular);
    let mut faces = Vec::new();
    for j in 0..n_radial - 1 {
        for i in 0..n_angular {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    HalfedgeMesh::from_faces(n_radial * n_angular, faces, Some(positions))
        .expect("annulus is a valid mesh")
}

/// Closed surface of a one-voxel-thick slab with `holes` square through-holes
/// in a row, so its genus equals `holes`. Each unit cell is split into
/// `resolution` voxels per axis.
pub fn voxel_plate(holes: usize, resolution: usize) -> HalfedgeMesh {
    let s = resolution.max(1) as i64;
    let width = (2 * holes as i64 + 1) * s;
    let height = 3 * s;
    let depth = s;
    let solid = |x: i64, y: i64, z: i64| -> bool {
        if x < 0 || y < 0 || z < 0 || x >= width || y >= height || z >= depth {
            return false;
        }
        let (cx, cy) = (x / s, y / s);
        !(cy == 1 && cx % 2 == 1)
    };

    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut vertex = |p: [i64; 3], positions: &mut Vec<[f64; 3]>| -> usize {
        *index.entry(p).or_insert_with(|| {
            positions.push([p[0] as f64 / s as f64, p[1] as f64 / s as f64, p[2] as f64 / s as f64]);
            positions.len() - 1
        })
    };

    for z in 0..depth {
        for y in 0..height {
            for x in 0..width {
                if !solid(x, y, z) {
                    continue;
                }
                let cell = [x, y, z];
                for axis in 0..3 {
                    for sign in [1i64, -1] {
                        let mut n = cell;
                        n[axis] += sign;
                        if solid(n[0], n[1], n[2]) {
                            continue;
                        }
                        let b = (axis + 1) % 3;
                        let c = (axis + 2) % 3;
                        let mut base = cell;
                        if sign > 0 {
                            base[axis] += 1;
                        }
                        let mut p1 = base;
                        p1[b] += 1;
                        let mut p2 = p1;
                        p2[c] += 1;
                        let mut p3 = base;
                        p3[c] += 1;
                        let mut quad = [base, p1, p2, p3];
                        if sign < 0 {
                            quad.reverse();
                        }
                        let ids = quad.map(|p| vertex(p, &mut positions));
                        faces.push([ids[0], ids[1], ids[2]]);
                        faces.push([ids[0], ids[2], ids[3]]);
                    }
                }
            }
        }
    }
    HalfedgeMesh::from_faces(positions.len(), faces, Some(positions))
        .expect("voxel plate is a valid mesh")
}

/// Genus-`holes` plate at unit resolution.
pub fn plate_with_holes(holes: usize) -> HalfedgeMesh {
    voxel_plate(holes, 1)
}
