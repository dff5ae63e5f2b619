//! Conformal and quasi-conformal parameterization of triangle meshes by
//! discrete Yamabe flow.

pub mod beltrami;
pub mod embed;
pub mod flow;
pub mod generators;
pub mod mesh;
pub mod metric;
pub mod param;
pub mod pipeline;
