//! Corner-angle derivatives and the sparse curvature Jacobian.

use crate::mesh::HalfedgeMesh;
use crate::metric::{corner_angles, DiscreteMetric, Geometry, MetricError};

/// `d[i][j] = ∂θ_i / ∂u_j` for the three corners of one face, where `lengths[c]`
/// is the (deformed) side opposite corner `c` and `angles` its corner angles.
///
/// Off-diagonal entries are symmetric bit-for-bit, `d[i][j] == d[j][i]`.
pub fn angle_derivatives(geometry: Geometry, lengths: [f64; 3], angles: [f64; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    match geometry {
        Geometry::Euclidean => {
            let cot = angles.map(|t| 1.0 / t.tan());
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                d[i][j] = cot[k];
                d[i][k] = cot[j];
                d[i][i] = -cot[j] - cot[k];
            }
        }
        Geometry::Hyperbolic => {
            let c = lengths.map(f64::cosh);
            // sin θ_k sinh y_i sinh y_j, the same for every k by the sine law
            let area_term = angles[2].sin() * lengths[0].sinh() * lengths[1].sinh();
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let off = |a: usize, b: usize, opp: usize| {
                    2.0 * (c[a] + c[b] - c[opp] - 1.0) / (area_term * (c[opp] + 1.0))
                };
                d[i][j] = off(i.min(j), i.max(j), k);
                d[i][k] = off(i.min(k), i.max(k), j);
                let numer = 2.0 * c[i] * c[j] * c[k] - c[j] * c[j] - c[k] * c[k]
                    + c[i] * c[j]
                    + c[i] * c[k]
                    - c[j]
                    - c[k];
                d[i][i] = -2.0 * numer / (area_term * (c[j] + 1.0) * (c[k] + 1.0));
            }
        }
    }
    d
}

/// Symmetric sparse matrix over vertices with the mesh's edge pattern plus
/// the diagonal, stored row-compressed with sorted columns.
#[derive(Debug, Clone)]
pub struct SparseHessian {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHessian {
    /// All-zero matrix with the adjacency pattern of `mesh`.
    pub fn zeros(mesh: &HalfedgeMesh) -> Self {
        let n = mesh.n_vertices();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
        for e in 0..mesh.n_edges() {
            let [a, b] = mesh.edge_vertices(e);
            rows[a].push(b);
            rows[b].push(a);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len()];
        Self {
            row_ptr,
            cols,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j).expect("entry outside the sparsity pattern");
        self.values[k] += value;
    }

    /// Nonzero pattern of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}

/// Jacobian `∂K/∂u` of vertex curvature with respect to the conformal
/// factors, evaluated at the (already deformed) `metric`.
///
/// This is the Yamabe-energy Hessian with the sign that makes it positive
/// semi-definite: off-diagonals are `-(∂θ_i/∂u_j)` summed over the faces of
/// edge `ij`, diagonals `-(∂θ_i/∂u_i)` summed over the faces around `i`.
pub fn assemble_hessian(
    mesh: &HalfedgeMesh,
    metric: &DiscreteMetric,
) -> Result<SparseHessian, MetricError> {
    let angles = corner_angles(metric, mesh)?;
    let mut hessian = SparseHessian::zeros(mesh);
    for (f, face) in mesh.faces().iter().enumerate() {
        let d = angle_derivatives(metric.geometry(), metric.face_lengths(mesh, f), angles[f]);
        for i in 0..3 {
            hessian.add(face[i], face[i], -d[i][i]);
            let j = (i + 1) % 3;
            let value = -d[i][j];
            hessian.add(face[i], face[j], value);
            hessian.add(face[j], face[i], value);
        }
    }
    Ok(hessian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::metric::{curvature, deform_metric, triangle_angles};
    use crate::mesh::induced_metric;
    use approx::assert_relative_eq;

    fn fd_derivative(geometry: Geometry, base: [f64; 3], u: [f64; 3], i: usize, j: usize) -> f64 {
        let h = 1e-6;
        let angle = |u: [f64; 3]| {
            let y = [0, 1, 2].map(|c| {
                crate::metric::deform_length(geometry, base[c], u[(c + 1) % 3], u[(c + 2) % 3])
            });
            triangle_angles(geometry, y, 0).unwrap()[i]
        };
        let (mut up, mut dn) = (u, u);
        up[j] += h;
        dn[j] -= h;
        (angle(up) - angle(dn)) / (2.0 * h)
    }

    #[test]
    fn euclidean_equilateral_derivatives() {
        let t = [std::f64::consts::FRAC_PI_3; 3];
        let d = angle_derivatives(Geometry::Euclidean, [1.0; 3], t);
        let s = 3f64.sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { -2.0 / s } else { 1.0 / s };
                assert_relative_eq!(d[i][j], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn euclidean_rows_sum_to_zero_per_face() {
        let l = [0.8, 1.1, 1.3];
        let t = triangle_angles(Geometry::Euclidean, l, 0).unwrap();
        let d = angle_derivatives(Geometry::Euclidean, l, t);
        for row in d {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn hyperbolic_equilateral_matches_finite_differences() {
        let l = [1.0; 3];
        let t = triangle_angles(Geometry::Hyperbolic, l, 0).unwrap();
        let d = angle_derivatives(Geometry::Hyperbolic, l, t);
        for i in 0..3 {
            for j in 0..3 {
                let fd = fd_derivative(Geometry::Hyperbolic, l, [0.0; 3], i, j);
                assert_relative_eq!(d[i][j], fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn both_geometries_match_finite_differences_off_symmetry() {
        let base = [1.1, 0.9, 1.3];
        let u = [0.1, -0.2, 0.05];
        for geometry in [Geometry::Euclidean, Geometry::Hyperbolic] {
            let y = [0, 1, 2].map(|c| {
                crate::metric::deform_length(geometry, base[c], u[(c + 1) % 3], u[(c + 2) % 3])
            });
            let t = triangle_angles(geometry, y, 0).unwrap();
            let d = angle_derivatives(geometry, y, t);
            for i in 0..3 {
                for j in 0..3 {
                    let fd = fd_derivative(geometry, base, u, i, j);
                    assert_relative_eq!(d[i][j], fd, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn flat_grid_hessian_is_cotangent_laplacian() {
        // Independent cotangent weights: w_ij = (cot α + cot β) / 2 from the
        // angles opposite edge ij, via dot and cross products of positions.
        let mesh = generators::grid(6, 5, 1.0, 0.8);
        let metric = induced_metric(&mesh).unwrap();
        let h = assemble_hessian(&mesh, &metric).unwrap();
        let p = mesh.positions().unwrap();
        let mut weight = vec![0.0; mesh.n_edges()];
        for face in mesh.faces() {
            for c in 0..3 {
                let (o, a, b) = (p[face[c]], p[face[(c + 1) % 3]], p[face[(c + 2) % 3]]);
                let ea = [a[0] - o[0], a[1] - o[1]];
                let eb = [b[0] - o[0], b[1] - o[1]];
                let cot = (ea[0] * eb[0] + ea[1] * eb[1]) / (ea[0] * eb[1] - ea[1] * eb[0]).abs();
                let e = mesh.find_edge(face[(c + 1) % 3], face[(c + 2) % 3]).unwrap();
                weight[e] += 0.5 * cot;
            }
        }
        for (e, w) in weight.iter().enumerate() {
            let [a, b] = mesh.edge_vertices(e);
            assert_relative_eq!(h.get(a, b), -2.0 * w, epsilon = 1e-12);
        }
    }

    #[test]
    fn assembled_hessian_is_symmetric_with_zero_rows() {
        let mesh = generators::height_field(7, 7, 1.0, 1.0, |x, y| 0.3 * (x * y * 5.0).sin());
        let base = induced_metric(&mesh).unwrap();
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|v| 0.05 * ((v * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let metric = deform_metric(&mesh, &base, &u).unwrap();
        let h = assemble_hessian(&mesh, &metric).unwrap();
        for i in 0..h.n() {
            let mut max = 0.0f64;
            let mut sum = 0.0;
            for (j, v) in h.row(i) {
                assert_eq!(v, h.get(j, i));
                max = max.max(v.abs());
                sum += v;
            }
            assert!(sum.abs() <= 1e-10 * max);
        }
        // consistency with the curvature map in one direction
        let dir: Vec<f64> = (0..mesh.n_vertices()).map(|v| ((v * 3 % 7) as f64 - 3.0) / 3.0).collect();
        let step = 1e-6;
        let shifted = |s: f64| {
            let uu: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            curvature(&deform_metric(&mesh, &base, &uu).unwrap(), &mesh).unwrap()
        };
        let (kp, km) = (shifted(step), shifted(-step));
        let mut hv = vec![0.0; h.n()];
        h.mul_vec(&dir, &mut hv);
        let scale = hv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..h.n() {
            let fd = (kp[i] - km[i]) / (2.0 * step);
            assert!((fd - hv[i]).abs() <= 1e-5 * scale);
        }
    }
}
