//! Legendre modal basis and Gauss-Legendre quadrature on the reference
//! interval [-1, 1].
//!
//! Element functions are expanded as `w(x) = sum_j c_j L_j(xi)` with
//! `x = x_mid + (h/2) xi`. The basis is normalised so that `L_j(1) = 1`,
//! which gives `L_j(-1) = (-1)^j` and `(L_i, L_j) = 2/(2j+1) delta_ij`.

use std::f64::consts::PI;

use crate::error::{HdgError, Result};
use crate::mesh::Mesh;

/// Degree-`k` Legendre polynomial at `x` by the three-term recurrence.
pub fn legendre_eval(k: usize, x: f64) -> f64 {
    legendre_with_derivative(k, x).0
}

/// `(L_k(x), L_k'(x))`.
pub fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for n in 1..k {
        let nf = n as f64;
        let p_next = ((2.0 * nf + 1.0) * x * p - nf * p_prev) / (nf + 1.0);
        // L'_{n+1} = L'_{n-1} + (2n+1) L_n
        let d_next = d_prev + (2.0 * nf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// Gauss-Legendre rule with `n` points on [-1, 1]; exact for degree `2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess, refined by Newton.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over [-1, 1].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Tabulated Legendre basis of degree `k` together with a quadrature rule.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    quad: GaussLegendre,
    /// `values[q][j] = L_j(xi_q)`
    values: Vec<Vec<f64>>,
    /// `derivs[q][j] = L_j'(xi_q)` (reference derivative)
    derivs: Vec<Vec<f64>>,
}

impl ReferenceBasis {
    /// Basis with an explicit number of quadrature points.
    pub fn with_quadrature(degree: usize, n_quad: usize) -> Self {
        let quad = GaussLegendre::new(n_quad);
        let mut values = Vec::with_capacity(n_quad);
        let mut derivs = Vec::with_capacity(n_quad);
        for &x in &quad.nodes {
            let (v, d): (Vec<f64>, Vec<f64>) =
                (0..=degree).map(|j| legendre_with_derivative(j, x)).unzip();
            values.push(v);
            derivs.push(d);
        }
        Self {
            degree,
            quad,
            values,
            derivs,
        }
    }

    /// `k + 2` points for linear problems, `2k + 2` when the flux is nonlinear.
    pub fn new(degree: usize, nonlinear: bool) -> Self {
        let n_quad = if nonlinear { 2 * degree + 2 } else { degree + 2 };
        Self::with_quadrature(degree, n_quad)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of modes, `k + 1`.
    pub fn n_modes(&self) -> usize {
        self.degree + 1
    }

    pub fn quadrature(&self) -> &GaussLegendre {
        &self.quad
    }

    pub fn value_at_quad(&self, q: usize, j: usize) -> f64 {
        self.values[q][j]
    }

    pub fn deriv_at_quad(&self, q: usize, j: usize) -> f64 {
        self.derivs[q][j]
    }

    /// `L_j(1)` for all modes.
    pub fn right_values(&self) -> Vec<f64> {
        vec![1.0; self.n_modes()]
    }

    /// `L_j(-1)` for all modes.
    pub fn left_values(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// `(L_j, L_j)` on the reference interval.
    pub fn reference_norm_sq(j: usize) -> f64 {
        2.0 / (2.0 * j as f64 + 1.0)
    }

    /// Evaluate a modal expansion at a reference point.
    pub fn eval(coeffs: &[f64], xi: f64) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * legendre_eval(j, xi))
            .sum()
    }

    /// Modal expansion at quadrature point `q`.
    pub fn eval_at_quad(&self, coeffs: &[f64], q: usize) -> f64 {
        coeffs
            .iter()
            .zip(&self.values[q])
            .map(|(c, v)| c * v)
            .sum()
    }

    /// Reference stiffness `K[j][n] = int L_n L_j' dxi`; independent of `h`.
    pub fn weak_derivative_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.n_modes();
        let mut k = vec![vec![0.0; m]; m];
        for q in 0..self.quad.len() {
            let w = self.quad.weights[q];
            for (j, row) in k.iter_mut().enumerate() {
                for (n, entry) in row.iter_mut().enumerate() {
                    *entry += w * self.values[q][n] * self.derivs[q][j];
                }
            }
        }
        k
    }

    /// Gram matrix on the reference interval.
    pub fn gram_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.n_modes();
        let mut g = vec![vec![0.0; m]; m];
        for q in 0..self.quad.len() {
            let w = self.quad.weights[q];
            for (i, row) in g.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    *entry += w * self.values[q][i] * self.values[q][j];
                }
            }
        }
        g
    }

    /// Element load vector `(f, L_j)_{I}` for an element of width `h`
    /// centred at `mid`, integrated with this basis' rule.
    pub fn load_vector(&self, mid: f64, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let m = self.n_modes();
        let mut out = vec![0.0; m];
        for q in 0..self.quad.len() {
            let x = mid + 0.5 * h * self.quad.nodes[q];
            let fw = 0.5 * h * self.quad.weights[q] * f(x);
            for (j, o) in out.iter_mut().enumerate() {
                *o += fw * self.values[q][j];
            }
        }
        out
    }
}

/// Per-element Legendre coefficients of one scalar variable.
pub type ModalField = Vec<Vec<f64>>;

/// L2 projection of `f` onto the broken space `W_h^k`.
///
/// Integrates with `max(n_quad, k + 6)` points so that the projection of a
/// polynomial of degree `<= k` is exact up to roundoff.
pub fn l2_project(f: impl Fn(f64) -> f64, mesh: &Mesh, basis: &ReferenceBasis) -> ModalField {
    let rule = ReferenceBasis::with_quadrature(basis.degree(), basis.quadrature().len().max(basis.degree() + 6));
    (0..mesh.n_elements())
        .map(|e| {
            let (mid, h) = (mesh.midpoint(e), mesh.width(e));
            rule.load_vector(mid, h, &f)
                .into_iter()
                .enumerate()
                .map(|(j, v)| v / (0.5 * h * ReferenceBasis::reference_norm_sq(j)))
                .collect()
        })
        .collect()
}

/// `L2` norm of `f - w_h` over the mesh with a `n_quad`-point rule per element.
pub fn l2_error(
    f: impl Fn(f64) -> f64,
    field: &ModalField,
    mesh: &Mesh,
    n_quad: usize,
) -> f64 {
    let rule = GaussLegendre::new(n_quad);
    let mut acc = 0.0;
    for (e, coeffs) in field.iter().enumerate() {
        let (mid, h) = (mesh.midpoint(e), mesh.width(e));
        acc += 0.5
            * h
            * rule.integrate(|xi| {
                let d = f(mid + 0.5 * h * xi) - ReferenceBasis::eval(coeffs, xi);
                d * d
            });
    }
    acc.sqrt()
}

pub(crate) fn check_degree(k: usize) -> Result<()> {
    if k > 8 {
        return Err(HdgError::InvalidConfig(format!(
            "polynomial degree {k} outside the supported range 0..=8"
        )));
    }
    Ok(())
}
