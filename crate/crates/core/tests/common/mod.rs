#![allow(dead_code)]

use hdg5::basis::{l2_error, legendre_eval, GaussLegendre, ModalField, ReferenceBasis};
use hdg5::global::{add_mass_term, element_loads, HdgSolver, SolutionField, SolverOptions, TraceVector};
use hdg5::local::Var;
use hdg5::mesh::Mesh;
use hdg5::problem::ProblemSpec;
use hdg5::stabilization::{StabilizationConfig, TraceClosure};
use hdg5::verification::hdg_project;

pub type Component = Box<dyn Fn(f64) -> f64>;

/// `(u, q, p, r, s)` for `u = sin(x + t)`.
pub fn travelling_sine(t: f64) -> [Component; 5] {
    [
        Box::new(move |x: f64| (x + t).sin()),
        Box::new(move |x: f64| (x + t).cos()),
        Box::new(move |x: f64| -(x + t).sin()),
        Box::new(move |x: f64| -(x + t).cos()),
        Box::new(move |x: f64| (x + t).sin()),
    ]
}

pub fn as_refs(c: &[Component; 5]) -> [&dyn Fn(f64) -> f64; 5] {
    [&*c[0], &*c[1], &*c[2], &*c[3], &*c[4]]
}

/// `||u_h||` from modal coefficients.
pub fn modal_l2(u: &ModalField, mesh: &Mesh) -> f64 {
    let mut acc = 0.0;
    for (e, c) in u.iter().enumerate() {
        let h = mesh.width(e);
        for (j, v) in c.iter().enumerate() {
            acc += 0.5 * h * ReferenceBasis::reference_norm_sq(j) * v * v;
        }
    }
    acc.sqrt()
}

/// `max |(w - Pi w, L_j)|` over elements, variables and `j < k`.
pub fn orthogonality_defect(c: &[Component; 5], pi: &SolutionField, mesh: &Mesh) -> f64 {
    let k = pi.degree();
    let quad = GaussLegendre::new(k + 8);
    let mut worst: f64 = 0.0;
    for (v, var) in Var::ALL.iter().enumerate() {
        let field = pi.field(*var);
        for e in 0..mesh.n_elements() {
            let h = mesh.width(e);
            for j in 0..k {
                let ip: f64 = (0..quad.len())
                    .map(|q| {
                        let xi = quad.nodes[q];
                        let x = mesh.to_physical(e, xi);
                        let d = c[v](x) - ReferenceBasis::eval(&field[e], xi);
                        quad.weights[q] * d * legendre_eval(j, xi)
                    })
                    .sum();
                worst = worst.max((0.5 * h * ip).abs());
            }
        }
    }
    worst
}

fn closure_defect(cl: &TraceClosure, d_w: f64, d: &[f64; 5]) -> f64 {
    (d_w - cl.gap_u * d[0] - cl.gap_q * d[1] - cl.gap_p * d[2]).abs()
}

/// Largest violation of the five face relations of the projection.
pub fn face_defect(c: &[Component; 5], pi: &SolutionField, mesh: &Mesh, cfg: &StabilizationConfig) -> f64 {
    let table = cfg.derived_traces();
    let mut worst: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let st = pi.state(e);
        let (xl, xr) = (mesh.node(e), mesh.node(e + 1));
        let mut dl = [0.0; 5];
        let mut dr = [0.0; 5];
        for (v, var) in Var::ALL.iter().enumerate() {
            dl[v] = c[v](xl) - st.left_value(*var);
            dr[v] = c[v](xr) - st.right_value(*var);
        }
        worst = worst
            .max(closure_defect(&table.p_plus, dl[2], &dl))
            .max(closure_defect(&table.r_plus, dl[3], &dl))
            .max(closure_defect(&table.s_plus, dl[4], &dl))
            .max(closure_defect(&table.r_minus, dr[3], &dr))
            .max(closure_defect(&table.s_minus, dr[4], &dr));
    }
    worst
}

/// Re-project each element's polynomials (extended to the whole line) and
/// return the largest coefficient change on that element.
pub fn idempotence_defect(
    pi: &SolutionField,
    mesh: &Mesh,
    basis: &ReferenceBasis,
    cfg: &StabilizationConfig,
) -> f64 {
    let mut worst: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let (mid, h) = (mesh.midpoint(e), mesh.width(e));
        let st = pi.state(e).clone();
        let comps: Vec<Component> = Var::ALL
            .iter()
            .map(|v| {
                let coeffs = st.var(*v).to_vec();
                Box::new(move |x: f64| ReferenceBasis::eval(&coeffs, 2.0 * (x - mid) / h)) as Component
            })
            .collect();
        let refs: [&dyn Fn(f64) -> f64; 5] = [&*comps[0], &*comps[1], &*comps[2], &*comps[3], &*comps[4]];
        let again = hdg_project(refs, mesh, basis, cfg).expect("projection");
        for (a, b) in again.state(e).as_slice().iter().zip(st.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// `sum_w ||w - Pi w||`.
pub fn projection_error_sum(c: &[Component; 5], pi: &SolutionField, mesh: &Mesh) -> f64 {
    Var::ALL
        .iter()
        .enumerate()
        .map(|(v, var)| l2_error(&*c[v], &pi.field(*var), mesh, pi.degree() + 8))
        .sum()
}

pub fn average_state(a: &SolutionField, b: &SolutionField) -> SolutionField {
    let mut out = a.clone();
    for e in 0..a.n_elements() {
        for (x, y) in out.state_mut(e).as_mut_slice().iter_mut().zip(b.state(e).as_slice()) {
            *x = 0.5 * (*x + y);
        }
    }
    out
}

pub fn average_traces(a: &TraceVector, b: &TraceVector) -> TraceVector {
    let mut out = a.clone();
    let avg = |x: &mut Vec<f64>, y: &Vec<f64>| {
        for (p, q) in x.iter_mut().zip(y) {
            *p = 0.5 * (*p + q);
        }
    };
    avg(&mut out.u_hat, &b.u_hat);
    avg(&mut out.q_hat, &b.q_hat);
    avg(&mut out.p_hat, &b.p_hat);
    out
}

/// Local and transmission residuals of the midpoint stage between two
/// levels, measured with an independently built solver.
pub fn stage_residuals(
    problem: &ProblemSpec,
    mesh: &Mesh,
    k: usize,
    cfg: &StabilizationConfig,
    t: f64,
    dt: f64,
    prev: (&SolutionField, &TraceVector),
    next: (&SolutionField, &TraceVector),
) -> (f64, f64) {
    let gamma = 2.0 / dt;
    let solver = HdgSolver::new(
        mesh,
        k,
        problem.alpha,
        problem.beta,
        problem.flux.clone(),
        cfg,
        gamma,
        SolverOptions::default(),
    )
    .expect("solver");
    let t_mid = t + 0.5 * dt;
    let f = problem.forcing.clone();
    let mut loads = element_loads(mesh, solver.basis(), |x| f(x, t_mid));
    add_mass_term(&mut loads, mesh, gamma, &prev.0.field(Var::U));
    let field = average_state(prev.0, next.0);
    let traces = average_traces(prev.1, next.1);
    let trans = solver.transmission_residual(&field, &traces);
    let total = solver.residual_norm(&field, &traces, &loads);
    (total, trans)
}
