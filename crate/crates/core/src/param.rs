//! Per-vertex complex coordinates in the plane or the Poincaré disk.

use num_complex::Complex64;
use thiserror::Error;

use crate::metric::Geometry;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParamError {
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),

    #[error("vertex {0} lies outside the unit disk")]
    OutsideDisk(usize),

    #[error("expected {expected} coordinates, got {found}")]
    Count { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameterization {
    geometry: Geometry,
    coords: Vec<Complex64>,
}

impl Parameterization {
    pub fn new(geometry: Geometry, coords: Vec<Complex64>) -> Result<Self, ParamError> {
        for (v, z) in coords.iter().enumerate() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(ParamError::NonFinite(v));
            }
            if geometry == Geometry::Hyperbolic && z.norm_sqr() >= 1.0 {
                return Err(ParamError::OutsideDisk(v));
            }
        }
        Ok(Self { geometry, coords })
    }

    /// Planar coordinates.
    pub fn plane(coords: Vec<Complex64>) -> Result<Self, ParamError> {
        Self::new(Geometry::Euclidean, coords)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn expect_len(&self, n: usize) -> Result<(), ParamError> {
        if self.coords.len() == n {
            Ok(())
        } else {
            Err(ParamError::Count {
                expected: n,
                found: self.coords.len(),
            })
        }
    }

    pub fn into_coords(self) -> Vec<Complex64> {
        self.coords
    }
}

impl std::ops::Index<usize> for Parameterization {
    type Output = Complex64;

    fn index(&self, v: usize) -> &Complex64 {
        &self.coords[v]
    }
}
