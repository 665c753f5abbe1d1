//! Crank–Nicolson marching, written as one stationary HDG solve per step.
//!
//! With `gamma = 2 / dt` the stage `w` at `t_j + dt/2` solves
//! `gamma w + D(w) = f(t_j + dt/2) + gamma u^j`, and `u^{j+1} = 2 w - u^j`
//! for every field and trace.

use crate::error::{HdgError, Result};
use crate::global::{
    element_loads, HdgSolver, NewtonReport, SolutionField, SolverOptions, TraceVector,
};
use crate::local::Var;
use crate::mesh::Mesh;
use crate::problem::ProblemSpec;
use crate::stabilization::StabilizationConfig;

/// Step size used in the convergence studies: `0.1 h` for `k <= 1`,
/// `0.1 h^2` otherwise.
pub fn paper_time_step(k: usize, h: f64) -> f64 {
    if k <= 1 {
        0.1 * h
    } else {
        0.1 * h * h
    }
}

/// Step sizes reaching `t_final` exactly; the last step may be shorter.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(HdgError::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(HdgError::InvalidConfig(format!("final time must be >= 0, got {t_final}")));
        }
        let ratio = t_final / dt;
        let mut full = ratio.floor() as usize;
        let mut rest = t_final - full as f64 * dt;
        if rest > dt * (1.0 - 1e-9) {
            full += 1;
            rest = 0.0;
        }
        let mut steps = vec![dt; full];
        if rest > 1e-12 * dt.max(t_final) {
            steps.push(rest);
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone)]
pub struct TimeState {
    pub t: f64,
    pub field: SolutionField,
    pub traces: TraceVector,
}

/// Outcome of a full march.
#[derive(Debug, Clone)]
pub struct MarchSummary {
    pub state: TimeState,
    pub steps: usize,
    pub max_newton_iterations: usize,
}

/// Marches one problem on one mesh.
#[derive(Debug, Clone)]
pub struct TimeIntegrator {
    problem: ProblemSpec,
    mesh: Mesh,
    degree: usize,
    cfg: StabilizationConfig,
    options: SolverOptions,
    dt: f64,
    solver: HdgSolver,
}

impl TimeIntegrator {
    pub fn new(
        problem: &ProblemSpec,
        mesh: &Mesh,
        degree: usize,
        cfg: &StabilizationConfig,
        dt: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        problem.validate()?;
        if mesh.boundary() != problem.boundary {
            return Err(HdgError::InvalidMesh("mesh and problem boundary kinds differ".into()));
        }
        if !(dt > 0.0) {
            return Err(HdgError::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        let solver = Self::make_solver(problem, mesh, degree, cfg, 2.0 / dt, options)?;
        Ok(Self {
            problem: problem.clone(),
            mesh: mesh.clone(),
            degree,
            cfg: *cfg,
            options,
            dt,
            solver,
        })
    }

    fn make_solver(
        problem: &ProblemSpec,
        mesh: &Mesh,
        degree: usize,
        cfg: &StabilizationConfig,
        gamma: f64,
        options: SolverOptions,
    ) -> Result<HdgSolver> {
        HdgSolver::new(mesh, degree, problem.alpha, problem.beta, problem.flux.clone(), cfg, gamma, options)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn solver(&self) -> &HdgSolver {
        &self.solver
    }

    /// `u_h(0)` from the stationary problem `u + D(u) = D(u_0) + u_0`.
    pub fn initialize(&self) -> Result<(TimeState, NewtonReport)> {
        let mut s = Self::make_solver(&self.problem, &self.mesh, self.degree, &self.cfg, 1.0, self.options)?;
        let u0 = self.problem.initial.clone();
        let du0 = self.problem.initial_operator.clone();
        let loads = element_loads(&self.mesh, s.basis(), |x| du0(x) + u0(x));
        let sol = s.solve(&loads, self.problem.boundary_values(0.0), None)?;
        Ok((
            TimeState {
                t: 0.0,
                field: sol.field,
                traces: sol.traces,
            },
            sol.report,
        ))
    }

    /// Advance by `dt` (which may differ from the nominal step). A negative
    /// `dt` runs the same midpoint equation backwards.
    pub fn step(&mut self, state: &TimeState, dt: f64) -> Result<(TimeState, NewtonReport)> {
        let gamma = 2.0 / dt;
        let mut tmp;
        let solver = if (dt - self.dt).abs() <= 1e-14 * self.dt {
            &mut self.solver
        } else {
            tmp = Self::make_solver(&self.problem, &self.mesh, self.degree, &self.cfg, gamma, self.options)?;
            &mut tmp
        };
        let t_mid = state.t + 0.5 * dt;
        let f = self.problem.forcing.clone();
        let loads = element_loads(&self.mesh, solver.basis(), |x| f(x, t_mid));
        let stage = solver.solve_about(
            &loads,
            self.problem.boundary_values(t_mid),
            Some((&state.field, &state.traces)),
            &state.field.field(Var::U),
        )?;
        let next = TimeState {
            t: state.t + dt,
            field: stage.field.extrapolate_from(&state.field),
            traces: stage.traces.extrapolate_from(&state.traces),
        };
        Ok((next, stage.report))
    }

    /// Initialize and march to `t_final`, calling `observer` at every level
    /// including `t = 0`.
    pub fn march(
        &mut self,
        t_final: f64,
        mut observer: impl FnMut(&TimeState),
    ) -> Result<MarchSummary> {
        let grid = TimeGrid::new(t_final, self.dt)?;
        let (mut state, report) = self.initialize()?;
        let mut max_it = report.iterations;
        observer(&state);
        for &dt in grid.steps() {
            let (next, rep) = self.step(&state, dt)?;
            max_it = max_it.max(rep.iterations);
            state = next;
            observer(&state);
        }
        Ok(MarchSummary {
            state,
            steps: grid.len(),
            max_newton_iterations: max_it,
        })
    }
}
