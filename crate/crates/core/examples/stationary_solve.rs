//! Stationary problem `u - u_xxxxx = f` on a periodic `[0, 2 pi]` with exact
//! solution `sin x`, solved on a sequence of meshes.
//!
//!     cargo run --release --example stationary_solve -- 2

use hdg5::basis::l2_error;
use hdg5::global::{element_loads, HdgSolver, SolverOptions};
use hdg5::local::Var;
use hdg5::mesh::{BoundaryKind, Mesh};
use hdg5::problem::stationary_sine_problem;
use hdg5::stabilization::StabilizationConfig;
use hdg5::verification::eoc;

fn main() -> hdg5::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let (problem, f) = stationary_sine_problem(1.0);
    let cfg = StabilizationConfig::paper_periodic();
    println!("{:>5} {:>12} {:>6} {:>10}", "N", "||u - u_h||", "eoc", "residual");
    let mut prev = None;
    for n in 3..=7 {
        let mesh = Mesh::uniform(0.0, 2.0 * std::f64::consts::PI, 1 << n, BoundaryKind::Periodic)?;
        let mut solver = HdgSolver::new(&mesh, k, problem.alpha, problem.beta, problem.flux.clone(), &cfg, 1.0, SolverOptions::default())?;
        let loads = element_loads(&mesh, solver.basis(), |x| f(x));
        let sol = solver.solve(&loads, None, None)?;
        let err = l2_error(f64::sin, &sol.field.field(Var::U), &mesh, k + 6);
        let rate = prev.and_then(|p| eoc(p, err)).map_or("-".to_string(), |r| format!("{r:.2}"));
        let res = solver.residual_norm(&sol.field, &sol.traces, &loads);
        println!("{:>5} {:>12.3e} {:>6} {:>10.1e}", 1 << n, err, rate, res);
        prev = Some(err);
    }
    Ok(())
}
