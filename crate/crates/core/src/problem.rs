//! PDE instances `u_t + alpha u_xxx + beta u_xxxxx + F(u)_x = f`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HdgError, Result};
use crate::mesh::BoundaryKind;

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Polynomial flux `F(u) = sum_j c_j u^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flux {
    coeffs: Vec<f64>,
}

impl Flux {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// `F(u) = u + u^2 + u^3`.
    pub fn cubic_test_flux() -> Self {
        Self::polynomial(vec![0.0, 1.0, 1.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn value(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, c)| acc * u + j as f64 * c)
    }
}

/// Exact solution `u` with its four spatial derivatives and `u_t`.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: SpaceTimeFn,
    pub q: SpaceTimeFn,
    pub p: SpaceTimeFn,
    pub r: SpaceTimeFn,
    pub s: SpaceTimeFn,
    pub u_t: SpaceTimeFn,
}

impl ExactSolution {
    /// The five variables in the order `(u, q, p, r, s)`.
    pub fn components(&self) -> [&SpaceTimeFn; 5] {
        [&self.u, &self.q, &self.p, &self.r, &self.s]
    }
}

/// Boundary values imposed in the Dirichlet case: `u` and `q` at both ends,
/// `p` at the right end.
#[derive(Clone)]
pub struct DirichletData {
    pub u_left: TimeFn,
    pub u_right: TimeFn,
    pub q_left: TimeFn,
    pub q_right: TimeFn,
    pub p_right: TimeFn,
}

impl DirichletData {
    pub fn homogeneous() -> Self {
        let z: TimeFn = Arc::new(|_| 0.0);
        Self {
            u_left: z.clone(),
            u_right: z.clone(),
            q_left: z.clone(),
            q_right: z.clone(),
            p_right: z,
        }
    }

    /// Sample the exact solution at the domain ends.
    pub fn from_exact(exact: &ExactSolution, a: f64, b: f64) -> Self {
        let (u, q, p) = (exact.u.clone(), exact.q.clone(), exact.p.clone());
        let (u2, q2) = (u.clone(), q.clone());
        Self {
            u_left: Arc::new(move |t| u(a, t)),
            u_right: Arc::new(move |t| u2(b, t)),
            q_left: Arc::new(move |t| q(a, t)),
            q_right: Arc::new(move |t| q2(b, t)),
            p_right: Arc::new(move |t| p(b, t)),
        }
    }

    /// `[u(a), u(b), q(a), q(b), p(b)]` at time `t`.
    pub fn values(&self, t: f64) -> [f64; 5] {
        [
            (self.u_left)(t),
            (self.u_right)(t),
            (self.q_left)(t),
            (self.q_right)(t),
            (self.p_right)(t),
        ]
    }
}

/// A complete problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: (f64, f64),
    pub boundary: BoundaryKind,
    pub alpha: f64,
    pub beta: f64,
    pub flux: Flux,
    pub forcing: SpaceTimeFn,
    pub initial: SpaceFn,
    /// `D(u_0) = alpha u_0''' + beta u_0''''' + F(u_0)'`, used to build the
    /// initial stationary solve.
    pub initial_operator: SpaceFn,
    pub exact: Option<ExactSolution>,
    pub dirichlet: Option<DirichletData>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("boundary", &self.boundary)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("flux", &self.flux)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) {
            return Err(HdgError::InvalidProblem(format!(
                "beta must be negative, got {}",
                self.beta
            )));
        }
        if !(self.domain.1 > self.domain.0) {
            return Err(HdgError::InvalidProblem("empty domain".into()));
        }
        if self.boundary == BoundaryKind::Dirichlet && self.dirichlet.is_none() {
            return Err(HdgError::InvalidProblem(
                "Dirichlet problem without boundary data".into(),
            ));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.flux.is_zero()
    }

    /// Copy with the flux dropped; used for Newton initial guesses.
    pub fn linear_part(&self) -> Self {
        Self {
            flux: Flux::zero(),
            ..self.clone()
        }
    }

    /// Dirichlet boundary values at time `t`, if any.
    pub fn boundary_values(&self, t: f64) -> Option<[f64; 5]> {
        match self.boundary {
            BoundaryKind::Periodic => None,
            BoundaryKind::Dirichlet => self.dirichlet.as_ref().map(|d| d.values(t)),
        }
    }

    /// Pointwise residual `u_t + alpha u_xxx + beta u_xxxxx + F(u)_x - f`
    /// of the exact solution, with `u_xxx = r` and `u_xxxxx` taken from a
    /// central difference of `s`.
    pub fn exact_residual(&self, x: f64, t: f64) -> Option<f64> {
        let ex = self.exact.as_ref()?;
        let h = 1e-4;
        let s_x = ((ex.s)(x - 2.0 * h, t) - 8.0 * (ex.s)(x - h, t) + 8.0 * (ex.s)(x + h, t)
            - (ex.s)(x + 2.0 * h, t))
            / (12.0 * h);
        let u = (ex.u)(x, t);
        Some(
            (ex.u_t)(x, t) + self.alpha * (ex.r)(x, t) + self.beta * s_x
                + self.flux.derivative(u) * (ex.q)(x, t)
                - (self.forcing)(x, t),
        )
    }
}

/// The four reference problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinProblem {
    P1,
    P2,
    P3,
    P4,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 4] = [Self::P1, Self::P2, Self::P3, Self::P4];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" | "1" => Some(Self::P1),
            "P2" | "2" => Some(Self::P2),
            "P3" | "3" => Some(Self::P3),
            "P4" | "4" => Some(Self::P4),
            _ => None,
        }
    }
}

impl fmt::Display for BuiltinProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::P3 => "P3",
            Self::P4 => "P4",
        };
        f.write_str(s)
    }
}

fn travelling_sine() -> ExactSolution {
    ExactSolution {
        u: Arc::new(|x, t| (x + t).sin()),
        q: Arc::new(|x, t| (x + t).cos()),
        p: Arc::new(|x, t| -(x + t).sin()),
        r: Arc::new(|x, t| -(x + t).cos()),
        s: Arc::new(|x, t| (x + t).sin()),
        u_t: Arc::new(|x, t| (x + t).cos()),
    }
}

fn growing_sine() -> ExactSolution {
    ExactSolution {
        u: Arc::new(|x, t| t * x.sin()),
        q: Arc::new(|x, t| t * x.cos()),
        p: Arc::new(|x, t| -t * x.sin()),
        r: Arc::new(|x, t| -t * x.cos()),
        s: Arc::new(|x, t| t * x.sin()),
        u_t: Arc::new(|x, _| x.sin()),
    }
}

/// Problem definitions with hand-derived manufactured forcing.
pub fn builtin_problem(id: BuiltinProblem) -> ProblemSpec {
    match id {
        // u = sin(x+t): u_t = cos, -u_xxxxx = -cos, so f = 0.
        BuiltinProblem::P1 => ProblemSpec {
            name: "P1".into(),
            domain: (0.0, 2.0 * PI),
            boundary: BoundaryKind::Periodic,
            alpha: 0.0,
            beta: -1.0,
            flux: Flux::zero(),
            forcing: Arc::new(|_, _| 0.0),
            initial: Arc::new(f64::sin),
            initial_operator: Arc::new(|x| -x.cos()),
            exact: Some(travelling_sine()),
            dirichlet: None,
        },
        // u_t + u_xxx - u_xxxxx = cos - cos - cos; F(u)_x = (1+2u+3u^2) cos.
        BuiltinProblem::P2 => ProblemSpec {
            name: "P2".into(),
            domain: (0.0, 2.0 * PI),
            boundary: BoundaryKind::Periodic,
            alpha: 1.0,
            beta: -1.0,
            flux: Flux::cubic_test_flux(),
            forcing: Arc::new(|x, t| {
                let u = (x + t).sin();
                (2.0 * u + 3.0 * u * u) * (x + t).cos()
            }),
            initial: Arc::new(f64::sin),
            initial_operator: Arc::new(|x| {
                let u = x.sin();
                (-1.0 + 2.0 * u + 3.0 * u * u) * x.cos()
            }),
            exact: Some(travelling_sine()),
            dirichlet: None,
        },
        // u = t sin x: f = sin x - t cos x.
        BuiltinProblem::P3 => {
            let exact = growing_sine();
            ProblemSpec {
                name: "P3".into(),
                domain: (0.0, PI),
                boundary: BoundaryKind::Dirichlet,
                alpha: 0.0,
                beta: -1.0,
                flux: Flux::zero(),
                forcing: Arc::new(|x, t| x.sin() - t * x.cos()),
                initial: Arc::new(|_| 0.0),
                initial_operator: Arc::new(|_| 0.0),
                dirichlet: Some(DirichletData::from_exact(&exact, 0.0, PI)),
                exact: Some(exact),
            }
        }
        // f = sin x - 2 t cos x + (1 + 2u + 3u^2) t cos x with u = t sin x.
        BuiltinProblem::P4 => {
            let exact = growing_sine();
            ProblemSpec {
                name: "P4".into(),
                domain: (0.0, PI),
                boundary: BoundaryKind::Dirichlet,
                alpha: 1.0,
                beta: -1.0,
                flux: Flux::cubic_test_flux(),
                forcing: Arc::new(|x, t| {
                    let u = t * x.sin();
                    x.sin() + (-1.0 + 2.0 * u + 3.0 * u * u) * t * x.cos()
                }),
                initial: Arc::new(|_| 0.0),
                initial_operator: Arc::new(|_| 0.0),
                dirichlet: Some(DirichletData::from_exact(&exact, 0.0, PI)),
                exact: Some(exact),
            }
        }
    }
}

/// Stationary problem `D(u) + gamma u = f_tilde` with exact solution
/// `sin x` on a periodic `[0, 2 pi]`, `alpha = 0`, `beta = -1`, `F = 0`.
/// Returned as a time-independent [`ProblemSpec`] plus `f_tilde`.
pub fn stationary_sine_problem(gamma: f64) -> (ProblemSpec, SpaceFn) {
    let mut p = builtin_problem(BuiltinProblem::P1);
    p.name = "stationary-sine".into();
    p.exact = Some(ExactSolution {
        u: Arc::new(|x, _| x.sin()),
        q: Arc::new(|x, _| x.cos()),
        p: Arc::new(|x, _| -x.sin()),
        r: Arc::new(|x, _| -x.cos()),
        s: Arc::new(|x, _| x.sin()),
        u_t: Arc::new(|_, _| 0.0),
    });
    let f: SpaceFn = Arc::new(move |x| -x.cos() + gamma * x.sin());
    (p, f)
}
