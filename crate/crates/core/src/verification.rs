//! HDG projection, error norms and the refinement studies.

use std::fmt::Write as _;

use crate::basis::{l2_error, l2_project, ModalField, ReferenceBasis};
use crate::error::{HdgError, Result};
use crate::global::{element_loads, HdgSolver, SolutionField, SolverOptions};
use crate::local::Var;
use crate::mesh::{BoundaryKind, Mesh};
use crate::problem::{stationary_sine_problem, ExactSolution, ProblemSpec, SpaceFn};
use crate::stabilization::StabilizationConfig;
use crate::time::{paper_time_step, TimeIntegrator};

/// Below this an error is treated as roundoff and left out of EOCs.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// `log2(coarse / fine)`, `None` when either error sits at the floor.
pub fn eoc(coarse: f64, fine: f64) -> Option<f64> {
    if coarse < ROUNDOFF_FLOOR || fine < ROUNDOFF_FLOOR || !coarse.is_finite() || !fine.is_finite() {
        return None;
    }
    Some((coarse / fine).log2())
}

/// The mode-`k` system for the HDG projection on one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSystem {
    cfg: StabilizationConfig,
    delta: f64,
}

impl ProjectionSystem {
    pub fn new(cfg: &StabilizationConfig) -> Result<Self> {
        let th = cfg.thetas();
        let delta = th.determinant();
        if delta.abs() < 1e-13 {
            return Err(HdgError::ProjectionSingular {
                determinant: delta,
                detail: format!(
                    "theta_q^s = {}, theta_u^s = {}, theta_q^r = {}, theta_u^r = {}",
                    th.s_q, th.s_u, th.r_q, th.r_u
                ),
            });
        }
        Ok(Self { cfg: *cfg, delta })
    }

    /// `theta_q^s theta_u^r - theta_u^s theta_q^r`.
    pub fn determinant(&self) -> f64 {
        self.delta
    }

    /// Mode-`k` corrections `[c_u, c_q, c_p, c_r, c_s]` from the projection
    /// gaps `g = w - (w)_k` at the left (`x^+`) and right (`x^-`) faces,
    /// each ordered `[u, q, p, r, s]`. `sigma = (-1)^k`.
    pub fn corrections(&self, g_left: &[f64; 5], g_right: &[f64; 5], sigma: f64) -> [f64; 5] {
        let t = &self.cfg;
        let th = t.thetas();
        let [gu_r, gq_r, gp_r, gr_r, gs_r] = *g_right;
        let [gu_l, gq_l, gp_l, gr_l, gs_l] = *g_left;
        let b1 = -(gs_r - t.tau_su_minus * gu_r - t.tau_sq_minus * gq_r - t.tau_sp_minus * gp_r);
        let b2 = -(gr_r - t.tau_ru_minus * gu_r - t.tau_rq_minus * gq_r - t.tau_rp_minus * gp_r);
        let b3 = -(gp_l + t.tau_pu_plus * gu_l + t.tau_pq_plus * gq_l);
        let b4 = -(gs_l + t.tau_su_plus * gu_l + t.tau_sq_plus * gq_l);
        let b5 = -(gr_l + t.tau_ru_plus * gu_l + t.tau_rq_plus * gq_l);
        let bt4 = -b1 + sigma * b4 - sigma * t.tau_sp_minus * b3;
        let bt5 = -b2 + sigma * b5 - sigma * t.tau_rp_minus * b3;
        let c_q = (bt4 * th.r_u - bt5 * th.s_u) / self.delta;
        let c_u = (bt5 * th.s_q - bt4 * th.r_q) / self.delta;
        let c_p = sigma * b3 - t.tau_pq_plus * c_q - t.tau_pu_plus * c_u;
        let c_r = b2 + t.tau_rp_minus * c_p + t.tau_rq_minus * c_q + t.tau_ru_minus * c_u;
        let c_s = b1 + t.tau_sp_minus * c_p + t.tau_sq_minus * c_q + t.tau_su_minus * c_u;
        [c_u, c_q, c_p, c_r, c_s]
    }
}

/// HDG projection of `(u, q, p, r, s)`: `Pi w = (w)_k - c_w L_k` element
/// by element.
pub fn hdg_project(
    components: [&dyn Fn(f64) -> f64; 5],
    mesh: &Mesh,
    basis: &ReferenceBasis,
    cfg: &StabilizationConfig,
) -> Result<SolutionField> {
    let sys = ProjectionSystem::new(cfg)?;
    let k = basis.degree();
    let sigma = if k % 2 == 0 { 1.0 } else { -1.0 };
    let proj: Vec<ModalField> = components.iter().map(|f| l2_project(f, mesh, basis)).collect();
    let mut out = SolutionField::zeros(mesh.n_elements(), k);
    for e in 0..mesh.n_elements() {
        let (xl, xr) = (mesh.node(e), mesh.node(e + 1));
        let mut gl = [0.0; 5];
        let mut gr = [0.0; 5];
        for (v, f) in components.iter().enumerate() {
            gl[v] = f(xl) - ReferenceBasis::eval(&proj[v][e], -1.0);
            gr[v] = f(xr) - ReferenceBasis::eval(&proj[v][e], 1.0);
        }
        let c = sys.corrections(&gl, &gr, sigma);
        let st = out.state_mut(e);
        for (v, var) in Var::ALL.iter().enumerate() {
            let dst = st.var_mut(*var);
            dst.copy_from_slice(&proj[v][e]);
            dst[k] -= c[v];
        }
    }
    Ok(out)
}

/// HDG projection of an exact solution at time `t`.
pub fn hdg_project_exact(
    exact: &ExactSolution,
    t: f64,
    mesh: &Mesh,
    basis: &ReferenceBasis,
    cfg: &StabilizationConfig,
) -> Result<SolutionField> {
    let c = exact.components();
    let f0 = |x: f64| (c[0])(x, t);
    let f1 = |x: f64| (c[1])(x, t);
    let f2 = |x: f64| (c[2])(x, t);
    let f3 = |x: f64| (c[3])(x, t);
    let f4 = |x: f64| (c[4])(x, t);
    hdg_project([&f0, &f1, &f2, &f3, &f4], mesh, basis, cfg)
}

/// L2 distance between two discrete fields, per variable.
pub fn discrete_distance(a: &SolutionField, b: &SolutionField, mesh: &Mesh) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (v, var) in Var::ALL.iter().enumerate() {
        let mut acc = 0.0;
        for e in 0..mesh.n_elements() {
            let h = mesh.width(e);
            for (j, (x, y)) in a.state(e).var(*var).iter().zip(b.state(e).var(*var)).enumerate() {
                acc += h / (2.0 * j as f64 + 1.0) * (x - y) * (x - y);
            }
        }
        out[v] = acc.sqrt();
    }
    out
}

/// Per-variable L2 errors `[e_u, e_q, e_p, e_r, e_s]` with an `n_quad`
/// point rule per element.
pub fn error_norms(field: &SolutionField, exact: &ExactSolution, t: f64, mesh: &Mesh, n_quad: usize) -> [f64; 5] {
    let c = exact.components();
    let mut out = [0.0; 5];
    for (v, var) in Var::ALL.iter().enumerate() {
        out[v] = l2_error(|x| (c[v])(x, t), &field.field(*var), mesh, n_quad);
    }
    out
}

/// Quadrature size for error norms: the solver rule plus three.
pub fn error_quadrature(basis: &ReferenceBasis) -> usize {
    basis.quadrature().len() + 3
}

/// Time-step choice for a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// `0.1 h` for `k <= 1`, `0.1 h^2` otherwise.
    Paper,
    Fixed(f64),
}

impl DtPolicy {
    pub fn step(&self, k: usize, h: f64) -> f64 {
        match *self {
            DtPolicy::Paper => paper_time_step(k, h),
            DtPolicy::Fixed(dt) => dt,
        }
    }
}

/// One mesh level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub k: usize,
    pub n_elements: usize,
    pub h: f64,
    pub dt: f64,
    /// `None` when the run failed.
    pub errors: Option<[f64; 5]>,
    pub eoc: [Option<f64>; 5],
    pub newton_iterations: usize,
    pub failure: Option<String>,
}

/// Errors and EOCs over a sequence of meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub problem: String,
    pub levels: Vec<LevelResult>,
}

impl ErrorReport {
    fn fill_eoc(&mut self) {
        for i in 1..self.levels.len() {
            let (a, b) = (self.levels[i - 1].errors, self.levels[i].errors);
            if let (Some(a), Some(b)) = (a, b) {
                for v in 0..5 {
                    self.levels[i].eoc[v] = eoc(a[v], b[v]);
                }
            }
        }
    }

    pub fn finest(&self) -> Option<&LevelResult> {
        self.levels.last()
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.levels.iter().map(|l| l.newton_iterations).max().unwrap_or(0)
    }

    /// CSV with header `k,N,h,dt,e_u,eoc_u,...,e_s,eoc_s`. Missing values
    /// are written as `-`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,N,h,dt");
        for v in Var::ALL {
            let _ = write!(s, ",e_{0},eoc_{0}", v.name());
        }
        s.push('\n');
        for l in &self.levels {
            let _ = write!(s, "{},{},{:.3e},{:.3e}", l.k, l.n_elements, l.h, l.dt);
            for v in 0..5 {
                match l.errors {
                    Some(e) => {
                        let _ = write!(s, ",{:.3e}", e[v]);
                    }
                    None => s.push_str(",-"),
                }
                match l.eoc[v] {
                    Some(r) => {
                        let _ = write!(s, ",{r:.3e}");
                    }
                    None => s.push_str(",-"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Run `problem` to `t_final` with `2^n` elements for every `n` in `levels`.
pub fn run_convergence_study(
    problem: &ProblemSpec,
    k: usize,
    levels: std::ops::RangeInclusive<u32>,
    policy: DtPolicy,
    cfg: &StabilizationConfig,
    t_final: f64,
) -> Result<ErrorReport> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| HdgError::InvalidProblem(format!("{} has no exact solution", problem.name)))?;
    let (a, b) = problem.domain;
    let mut report = ErrorReport {
        problem: problem.name.clone(),
        levels: Vec::new(),
    };
    for n in levels {
        let n_el = 1usize << n;
        let h = (b - a) / n_el as f64;
        let dt = policy.step(k, h);
        let mut level = LevelResult {
            k,
            n_elements: n_el,
            h,
            dt,
            errors: None,
            eoc: [None; 5],
            newton_iterations: 0,
            failure: None,
        };
        let run = (|| -> Result<([f64; 5], usize)> {
            let mesh = Mesh::uniform(a, b, n_el, problem.boundary)?;
            let mut ti = TimeIntegrator::new(problem, &mesh, k, cfg, dt, SolverOptions::default())?;
            let out = ti.march(t_final, |_| {})?;
            let nq = error_quadrature(ti.solver().basis());
            Ok((error_norms(&out.state.field, exact, out.state.t, &mesh, nq), out.max_newton_iterations))
        })();
        match run {
            Ok((e, it)) => {
                level.errors = Some(e);
                level.newton_iterations = it;
            }
            Err(err) => level.failure = Some(err.to_string()),
        }
        report.levels.push(level);
    }
    report.fill_eoc();
    Ok(report)
}

/// One level of the stationary superconvergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperLevel {
    pub n_elements: usize,
    /// `||Pi w - w_h||` for `w = u, q, p, r, s`.
    pub projected: [f64; 5],
    /// Max nodal error of `u_hat, q_hat, p_hat^-, r_hat^-, s_hat^-`.
    pub traces: [f64; 5],
    pub projected_eoc: [Option<f64>; 5],
    pub trace_eoc: [Option<f64>; 5],
}

/// Stationary `u - u_xxxxx = f` with exact solution `sin x` on a periodic
/// `[0, 2 pi]`.
pub fn superconvergence_study(
    k: usize,
    levels: std::ops::RangeInclusive<u32>,
    cfg: &StabilizationConfig,
) -> Result<Vec<SuperLevel>> {
    let (problem, f_tilde): (ProblemSpec, SpaceFn) = stationary_sine_problem(1.0);
    let exact = problem.exact.clone().expect("stationary problem has an exact solution");
    let (a, b) = problem.domain;
    let mut out: Vec<SuperLevel> = Vec::new();
    for n in levels {
        let n_el = 1usize << n;
        let mesh = Mesh::uniform(a, b, n_el, BoundaryKind::Periodic)?;
        let mut solver = HdgSolver::new(
            &mesh,
            k,
            problem.alpha,
            problem.beta,
            problem.flux.clone(),
            cfg,
            1.0,
            SolverOptions::default(),
        )?;
        let ft = f_tilde.clone();
        let loads = element_loads(&mesh, solver.basis(), |x| ft(x));
        let sol = solver.solve(&loads, None, None)?;
        let pi = hdg_project_exact(&exact, 0.0, &mesh, solver.basis(), cfg)?;
        let projected = discrete_distance(&pi, &sol.field, &mesh);
        let faces = solver.face_data(&sol.field, &sol.traces);
        let c = exact.components();
        let mut traces = [0.0f64; 5];
        for e in 0..n_el {
            let x = mesh.node(e + 1);
            let vals = [
                sol.traces.u_at_node(e + 1),
                sol.traces.q_at_node(e + 1),
                faces[e].p_minus,
                faces[e].r_minus,
                faces[e].s_minus,
            ];
            for v in 0..5 {
                traces[v] = traces[v].max((vals[v] - (c[v])(x, 0.0)).abs());
            }
        }
        let mut level = SuperLevel {
            n_elements: n_el,
            projected,
            traces,
            projected_eoc: [None; 5],
            trace_eoc: [None; 5],
        };
        if let Some(prev) = out.last() {
            for v in 0..5 {
                level.projected_eoc[v] = eoc(prev.projected[v], projected[v]);
                level.trace_eoc[v] = eoc(prev.traces[v], traces[v]);
            }
        }
        out.push(level);
    }
    Ok(out)
}
