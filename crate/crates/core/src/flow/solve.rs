//! Jacobi-preconditioned conjugate gradients for the Newton system.

use super::hessian::SparseHessian;
use super::FlowError;
use crate::metric::Geometry;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Solves `hessian · δu = rhs`.
///
/// In the Euclidean case the Hessian annihilates constants, so the system is
/// solved on the zero-mean subspace: the right-hand side, preconditioned
/// residuals and the returned increment all have zero sum.
pub fn newton_step(
    hessian: &SparseHessian,
    rhs: &[f64],
    geometry: Geometry,
    rel_tol: f64,
) -> Result<Vec<f64>, FlowError> {
    let n = hessian.n();
    assert_eq!(rhs.len(), n);
    let project = geometry == Geometry::Euclidean;

    let mut b = rhs.to_vec();
    if project {
        remove_mean(&mut b);
    }
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }

    let inv_diag: Vec<f64> = hessian
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * di;
        }
        if project {
            remove_mean(z);
        }
    };

    let mut r = b;
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n.max(1);
    let mut r_norm = b_norm;
    for _ in 0..max_iter {
        hessian.mul_vec(&p, &mut ap);
        if project {
            remove_mean(&mut ap);
        }
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(FlowError::IndefiniteHessian);
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = dot(&r, &r).sqrt();
        if r_norm <= rel_tol * b_norm {
            if project {
                remove_mean(&mut x);
            }
            return Ok(x);
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FlowError::SolverStagnation {
        iterations: max_iter,
        relative_residual: r_norm / b_norm,
    })
}
