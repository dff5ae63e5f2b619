//! Discrete Yamabe flow by damped Newton iterations.
//!
//! Each iteration deforms the base lengths by the current conformal factor,
//! measures curvature, solves the Newton system with the analytic Hessian and
//! takes the largest step `2^-k` whose metric is admissible and lowers
//! `max |K̄ - K|`. When halving alone cannot restore admissibility the
//! offending faces are repaired by intrinsic edge swaps.

mod hessian;
mod solve;
mod swap;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{HalfedgeMesh, MeshError};
use crate::metric::{
    check_triangle_inequality, curvature, deform_metric, undeform_length, ConformalFactor,
    CurvatureField, DiscreteMetric, Geometry, MetricError,
};

pub use hessian::{angle_derivatives, assemble_hessian, SparseHessian};
pub use solve::newton_step;
pub use swap::edge_swap;

/// Halvings tried before the line search falls back to edge swaps.
const HALVINGS_BEFORE_SURGERY: usize = 5;
/// Surgery rounds allowed within one Newton iteration.
const SURGERY_ROUNDS: usize = 3;

#[derive(Error, Debug)]
pub enum FlowError {
    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error("invalid flow options: {0}")]
    Options(&'static str),

    #[error("target has {found} values for {expected} vertices")]
    TargetLength { expected: usize, found: usize },

    #[error("target curvature sums to {sum}, but Gauss-Bonnet requires {expected}")]
    GaussBonnet { sum: f64, expected: f64 },

    #[error("initial metric violates the triangle inequality on {} face(s), first {}", .faces.len(), .faces[0])]
    Inadmissible { faces: Vec<usize> },

    #[error("linear solver stalled after {iterations} iterations (relative residual {relative_residual:e})")]
    SolverStagnation {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("Hessian is not positive definite on the search space")]
    IndefiniteHessian,

    #[error("no acceptable step at iteration {iteration} (residual {residual:e})")]
    LineSearch { iteration: usize, residual: f64 },

    #[error("not converged after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("edge swap on edge {edge} rejected: {reason}")]
    SwapRejected { edge: usize, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Stop once `max |K̄ - K|` falls below this (radians).
    pub epsilon: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub solver_tolerance: f64,
    pub surgery: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            max_iterations: 50,
            max_halvings: 20,
            solver_tolerance: 1e-12,
            surgery: true,
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.epsilon > 0.0) {
            return Err(FlowError::Options("epsilon must be positive"));
        }
        if self.max_iterations == 0 || self.max_halvings == 0 {
            return Err(FlowError::Options("iteration bounds must be at least 1"));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(FlowError::Options("solver tolerance must be positive"));
        }
        Ok(())
    }
}

/// Trajectory of one flow run. Serializes to
/// `{"iterations", "residuals", "swaps", "converged"}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub iterations: usize,
    /// `max |K̄ - K|` before the first and after every accepted iteration.
    pub residuals: Vec<f64>,
    pub swaps: usize,
    pub converged: bool,
    #[serde(skip)]
    pub halvings: usize,
    #[serde(skip)]
    pub conformal_factor: ConformalFactor,
}

/// Final state of a converged flow. `mesh` differs from the input only if
/// edge swaps were performed; vertex ids are always preserved.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub mesh: HalfedgeMesh,
    /// Deformed metric realising the target curvature.
    pub metric: DiscreteMetric,
    /// Base metric on `mesh` that `conformal_factor` deforms into `metric`.
    pub base: DiscreteMetric,
    pub conformal_factor: ConformalFactor,
    pub report: FlowReport,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Step-by-step driver of the flow, exposing the state between iterations.
#[derive(Debug, Clone)]
pub struct YamabeFlow {
    mesh: HalfedgeMesh,
    base: DiscreteMetric,
    target: CurvatureField,
    options: FlowOptions,
    u: ConformalFactor,
    metric: DiscreteMetric,
    curvature: CurvatureField,
    report: FlowReport,
}

impl YamabeFlow {
    pub fn new(
        mesh: &HalfedgeMesh,
        base: &DiscreteMetric,
        target: &[f64],
        options: FlowOptions,
    ) -> Result<Self, FlowError> {
        options.validate()?;
        if target.len() != mesh.n_vertices() {
            return Err(FlowError::TargetLength {
                expected: mesh.n_vertices(),
                found: target.len(),
            });
        }
        if base.geometry() == Geometry::Euclidean {
            let sum: f64 = target.iter().sum();
            let expected = 2.0 * PI * mesh.euler_characteristic() as f64;
            if (sum - expected).abs() > 1e-9 {
                return Err(FlowError::GaussBonnet { sum, expected });
            }
        }
        let faces = check_triangle_inequality(base, mesh);
        if !faces.is_empty() {
            return Err(FlowError::Inadmissible { faces });
        }
        let curvature = curvature(base, mesh)?;
        let residual = max_abs_diff(target, &curvature);
        Ok(Self {
            mesh: mesh.clone(),
            base: base.clone(),
            target: target.to_vec(),
            options,
            u: vec![0.0; mesh.n_vertices()],
            metric: base.clone(),
            curvature,
            report: FlowReport {
                residuals: vec![residual],
                ..FlowReport::default()
            },
        })
    }

    pub fn residual(&self) -> f64 {
        *self.report.residuals.last().expect("history starts non-empty")
    }

    pub fn converged(&self) -> bool {
        self.residual() < self.options.epsilon
    }

    pub fn mesh(&self) -> &HalfedgeMesh {
        &self.mesh
    }

    /// Current deformed metric.
    pub fn metric(&self) -> &DiscreteMetric {
        &self.metric
    }

    pub fn conformal_factor(&self) -> &[f64] {
        &self.u
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn report(&self) -> &FlowReport {
        &self.report
    }

    fn geometry(&self) -> Geometry {
        self.base.geometry()
    }

    /// Swaps the longest edge of every face listed, in the current metric.
    /// Returns whether anything changed; stops at the first rejected swap.
    fn surgery(&mut self, faces: &[usize], trial: &DiscreteMetric) -> Result<bool, FlowError> {
        let mut edges: Vec<(usize, usize)> = faces
            .iter()
            .map(|&f| {
                let ids = self.mesh.face_edges(f);
                let longest = ids
                    .into_iter()
                    .max_by(|&x, &y| trial.length(x).total_cmp(&trial.length(y)))
                    .expect("three edges");
                let [a, b] = self.mesh.edge_vertices(longest);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut changed = false;
        for (a, b) in edges {
            let Some(e) = self.mesh.find_edge(a, b) else {
                continue;
            };
            if self.mesh.is_boundary_edge(e) {
                continue;
            }
            let (mesh, metric) = match edge_swap(&self.mesh, &self.metric, e) {
                Ok(done) => done,
                Err(FlowError::SwapRejected { .. }) => break,
                Err(other) => return Err(other),
            };
            // carry base lengths over; the new diagonal is pulled back through u
            let geometry = self.geometry();
            let lengths = (0..mesh.n_edges())
                .map(|k| {
                    let [p, q] = mesh.edge_vertices(k);
                    match self.mesh.find_edge(p, q) {
                        Some(old) => self.base.length(old),
                        None => undeform_length(geometry, metric.length(k), self.u[p], self.u[q]),
                    }
                })
                .collect();
            self.base = DiscreteMetric::new(geometry, lengths)?;
            self.mesh = mesh;
            self.metric = metric;
            self.report.swaps += 1;
            changed = true;
        }
        if changed {
            self.curvature = curvature(&self.metric, &self.mesh)?;
        }
        Ok(changed)
    }

    /// One damped Newton iteration.
    pub fn step(&mut self) -> Result<(), FlowError> {
        let residual = self.residual();
        let mut surgery_rounds = 0;
        'solve: loop {
            let hessian = assemble_hessian(&self.mesh, &self.metric)?;
            let rhs: Vec<f64> = self
                .target
                .iter()
                .zip(&self.curvature)
                .map(|(t, k)| t - k)
                .collect();
            let delta = newton_step(&hessian, &rhs, self.geometry(), self.options.solver_tolerance)?;

            let mut scale = 1.0;
            for halving in 0..=self.options.max_halvings {
                let trial_u: Vec<f64> = self
                    .u
                    .iter()
                    .zip(&delta)
                    .map(|(u, d)| u + scale * d)
                    .collect();
                if let Ok(trial) = deform_metric(&self.mesh, &self.base, &trial_u) {
                    let violations = check_triangle_inequality(&trial, &self.mesh);
                    if violations.is_empty() {
                        let k = curvature(&trial, &self.mesh)?;
                        let r = max_abs_diff(&self.target, &k);
                        if r < residual {
                            self.u = trial_u;
                            self.metric = trial;
                            self.curvature = k;
                            self.report.iterations += 1;
                            self.report.residuals.push(r);
                            return Ok(());
                        }
                    } else if self.options.surgery
                        && halving >= HALVINGS_BEFORE_SURGERY
                        && surgery_rounds < SURGERY_ROUNDS
                    {
                        surgery_rounds += 1;
                        if self.surgery(&violations, &trial)? {
                            continue 'solve;
                        }
                    }
                }
                if halving < self.options.max_halvings {
                    scale *= 0.5;
                    self.report.halvings += 1;
                }
            }
            return Err(FlowError::LineSearch {
                iteration: self.report.iterations,
                residual,
            });
        }
    }

    pub fn into_result(self) -> FlowResult {
        let mut report = self.report;
        report.converged = report
            .residuals
            .last()
            .is_some_and(|&r| r < self.options.epsilon);
        report.conformal_factor = self.u.clone();
        FlowResult {
            mesh: self.mesh,
            metric: self.metric,
            base: self.base,
            conformal_factor: self.u,
            report,
        }
    }
}

/// Runs the flow from `base` (at `u = 0`) until `max |K̄ - K| < ε`.
pub fn run_flow(
    mesh: &HalfedgeMesh,
    base: &DiscreteMetric,
    target: &[f64],
    options: FlowOptions,
) -> Result<FlowResult, FlowError> {
    let mut flow = YamabeFlow::new(mesh, base, target, options)?;
    while !flow.converged() {
        if flow.report.iterations >= options.max_iterations {
            return Err(FlowError::NotConverged {
                iterations: flow.report.iterations,
                residual: flow.residual(),
            });
        }
        flow.step()?;
    }
    Ok(flow.into_result())
}
