//! Per-node 3-vector fields (displacements, adjoint states, gradients).

use std::ops::{Index, IndexMut};

use nalgebra::Vector3;

/// An `N x 3` array stored node by node; flat DoF index is `3 * node + r`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalField(pub Vec<Vector3<f64>>);

impl NodalField {
    pub fn zeros(n: usize) -> Self {
        NodalField(vec![Vector3::zeros(); n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Vector3<f64>) -> Self {
        NodalField((0..n).map(f).collect())
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len().is_multiple_of(3), "flat field length must be a multiple of 3");
        NodalField(
            flat.chunks_exact(3)
                .map(|c| Vector3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector3<f64>> {
        self.0.iter()
    }

    pub fn dot(&self, other: &NodalField) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: f64) -> NodalField {
        NodalField(self.0.iter().map(|v| v * a).collect())
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &NodalField) -> NodalField {
        assert_eq!(self.len(), other.len());
        NodalField(self.0.iter().zip(&other.0).map(|(x, y)| x + y * a).collect())
    }

    pub fn add_assign(&mut self, other: &NodalField) {
        assert_eq!(self.len(), other.len());
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += y;
        }
    }
}

impl Index<usize> for NodalField {
    type Output = Vector3<f64>;
    fn index(&self, i: usize) -> &Vector3<f64> {
        &self.0[i]
    }
}

impl IndexMut<usize> for NodalField {
    fn index_mut(&mut self, i: usize) -> &mut Vector3<f64> {
        &mut self.0[i]
    }
}
