//! One-dimensional partitions `0 = x_0 < x_1 < ... < x_N = L`.

use crate::error::{HdgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    boundary: BoundaryKind,
}

impl Mesh {
    /// Uniform partition of `[a, b]` into `n` elements.
    pub fn uniform(a: f64, b: f64, n: usize, boundary: BoundaryKind) -> Result<Self> {
        if n < 2 {
            return Err(HdgError::InvalidMesh(format!(
                "need at least two elements, got {n}"
            )));
        }
        if !(b - a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(HdgError::InvalidMesh(format!(
                "interval [{a}, {b}] has no positive length"
            )));
        }
        let h = (b - a) / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        nodes[n] = b;
        Ok(Self { nodes, boundary })
    }

    /// Arbitrary partition; nodes must be strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>, boundary: BoundaryKind) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(HdgError::InvalidMesh(format!(
                "need at least two elements, got {}",
                nodes.len().saturating_sub(1)
            )));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(HdgError::InvalidMesh(format!(
                "nodes not strictly increasing near {} .. {}",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes, boundary })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    /// Width of element `e` (0-based; element `e` is `(x_e, x_{e+1})`).
    pub fn width(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn midpoint(&self, e: usize) -> f64 {
        0.5 * (self.nodes[e + 1] + self.nodes[e])
    }

    /// `h = max h_i`.
    pub fn h(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.width(e))
            .fold(0.0, f64::max)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// True when every element has bitwise the same width.
    pub fn is_uniform(&self) -> bool {
        let h0 = self.width(0);
        (1..self.n_elements()).all(|e| self.width(e) == h0)
    }

    /// Map a reference coordinate in element `e` to physical space.
    pub fn to_physical(&self, e: usize, xi: f64) -> f64 {
        self.midpoint(e) + 0.5 * self.width(e) * xi
    }
}
