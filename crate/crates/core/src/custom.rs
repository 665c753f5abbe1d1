//! User-defined problems read from TOML.
//!
//! Functions of `(x, t)` are sums of terms from a small grammar:
//!
//! | `kind`    | term                     |
//! |-----------|--------------------------|
//! | `sin`     | `c sin(a x + b t)`       |
//! | `cos`     | `c cos(a x + b t)`       |
//! | `t-sin`   | `c t^m sin(a x)`         |
//! | `t-cos`   | `c t^m cos(a x)`         |
//! | `poly`    | `sum_j coeffs[j] x^j`    |
//!
//! Every term has closed-form `x` and `t` derivatives, so a manufactured
//! forcing can be built from an exact solution without finite differences.
//!
//! ```toml
//! name = "kawahara"
//! domain = [0.0, 6.283185307179586]
//! boundary = "periodic"
//! alpha = 1.0
//! beta = -1.0
//! flux = [0.0, 0.0, 0.5]
//!
//! [[exact]]
//! kind = "sin"
//! a = 1.0
//! b = 1.0
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HdgError, Result};
use crate::mesh::BoundaryKind;
use crate::problem::{DirichletData, ExactSolution, Flux, ProblemSpec, SpaceTimeFn};

fn one() -> f64 {
    1.0
}

/// One term of the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Term {
    Sin {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    Cos {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        a: f64,
        #[serde(default)]
        b: f64,
    },
    TSin {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        m: u32,
        #[serde(default)]
        a: f64,
    },
    TCos {
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        m: u32,
        #[serde(default)]
        a: f64,
    },
    Poly { coeffs: Vec<f64> },
}

impl Term {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match *self {
            Term::Sin { c, a, b } => c * (a * x + b * t).sin(),
            Term::Cos { c, a, b } => c * (a * x + b * t).cos(),
            Term::TSin { c, m, a } => c * t.powi(m as i32) * (a * x).sin(),
            Term::TCos { c, m, a } => c * t.powi(m as i32) * (a * x).cos(),
            Term::Poly { ref coeffs } => coeffs.iter().rev().fold(0.0, |acc, v| acc * x + v),
        }
    }

    fn dx(&self) -> Option<Term> {
        let t = match *self {
            Term::Sin { c, a, b } => Term::Cos { c: c * a, a, b },
            Term::Cos { c, a, b } => Term::Sin { c: -c * a, a, b },
            Term::TSin { c, m, a } => Term::TCos { c: c * a, m, a },
            Term::TCos { c, m, a } => Term::TSin { c: -c * a, m, a },
            Term::Poly { ref coeffs } => {
                if coeffs.len() <= 1 {
                    return None;
                }
                Term::Poly {
                    coeffs: coeffs.iter().enumerate().skip(1).map(|(j, v)| j as f64 * v).collect(),
                }
            }
        };
        Some(t)
    }

    fn dt(&self) -> Option<Term> {
        match *self {
            Term::Sin { c, a, b } => Some(Term::Cos { c: c * b, a, b }),
            Term::Cos { c, a, b } => Some(Term::Sin { c: -c * b, a, b }),
            Term::TSin { c, m, a } if m > 0 => Some(Term::TSin { c: c * m as f64, m: m - 1, a }),
            Term::TCos { c, m, a } if m > 0 => Some(Term::TCos { c: c * m as f64, m: m - 1, a }),
            _ => None,
        }
    }
}

/// A finite sum of [`Term`]s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(x, t)).sum()
    }

    pub fn dx(&self) -> Expr {
        Expr::new(self.terms.iter().filter_map(Term::dx).collect())
    }

    /// `n`-th derivative in `x`.
    pub fn dx_n(&self, n: usize) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.dx())
    }

    pub fn dt(&self) -> Expr {
        Expr::new(self.terms.iter().filter_map(Term::dt).collect())
    }

    pub fn to_fn(&self) -> SpaceTimeFn {
        let e = self.clone();
        Arc::new(move |x, t| e.eval(x, t))
    }
}

/// Contents of a problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(default = "default_name")]
    pub name: String,
    pub domain: [f64; 2],
    pub boundary: BoundaryKind,
    pub alpha: f64,
    pub beta: f64,
    /// Coefficients of `F(u) = sum_j flux[j] u^j`.
    #[serde(default)]
    pub flux: Vec<f64>,
    /// Exact solution; the forcing is manufactured from it unless given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Expr>,
    /// Initial data, evaluated at `t = 0`; defaults to the exact solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Expr>,
}

fn default_name() -> String {
    "custom".into()
}

impl CustomProblem {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HdgError::InvalidConfig(format!("problem file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| HdgError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem serializes")
    }

    /// Build the solver-facing problem. Dirichlet data come from the exact
    /// solution when present and are homogeneous otherwise.
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let flux = Flux::polynomial(self.flux.clone());
        let initial = match (&self.initial, &self.exact) {
            (Some(e), _) | (None, Some(e)) => e.clone(),
            (None, None) => {
                return Err(HdgError::InvalidProblem(
                    "problem file needs `exact` or `initial`".into(),
                ))
            }
        };
        if self.exact.is_none() && self.forcing.is_none() {
            return Err(HdgError::InvalidProblem(
                "problem file needs `exact` or `forcing`".into(),
            ));
        }
        let (alpha, beta) = (self.alpha, self.beta);
        let operator = |e: &Expr| -> SpaceTimeFn {
            let (u, q, r, s5) = (e.to_fn(), e.dx().to_fn(), e.dx_n(3).to_fn(), e.dx_n(5).to_fn());
            let f = flux.clone();
            Arc::new(move |x, t| alpha * r(x, t) + beta * s5(x, t) + f.derivative(u(x, t)) * q(x, t))
        };
        let exact = self.exact.as_ref().map(|e| ExactSolution {
            u: e.to_fn(),
            q: e.dx().to_fn(),
            p: e.dx_n(2).to_fn(),
            r: e.dx_n(3).to_fn(),
            s: e.dx_n(4).to_fn(),
            u_t: e.dt().to_fn(),
        });
        let forcing: SpaceTimeFn = match (&self.forcing, &self.exact) {
            (Some(f), _) => f.to_fn(),
            (None, Some(e)) => {
                let d = operator(e);
                let ut = e.dt().to_fn();
                Arc::new(move |x, t| ut(x, t) + d(x, t))
            }
            (None, None) => unreachable!(),
        };
        let (u0, du0) = (initial.to_fn(), operator(&initial));
        let (a, b) = (self.domain[0], self.domain[1]);
        let dirichlet = match self.boundary {
            BoundaryKind::Periodic => None,
            BoundaryKind::Dirichlet => Some(match &exact {
                Some(ex) => DirichletData::from_exact(ex, a, b),
                None => DirichletData::homogeneous(),
            }),
        };
        let spec = ProblemSpec {
            name: self.name.clone(),
            domain: (a, b),
            boundary: self.boundary,
            alpha,
            beta,
            flux,
            forcing,
            initial: Arc::new(move |x| u0(x, 0.0)),
            initial_operator: Arc::new(move |x| du0(x, 0.0)),
            exact,
            dirichlet,
        };
        spec.validate()?;
        Ok(spec)
    }
}
