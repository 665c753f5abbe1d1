//! March Problem 1 (`u_t - u_xxxxx = 0`, `u = sin(x + t)`) with the
//! midpoint rule and print the error and discrete L2 norm along the way.
//!
//!     cargo run --release --example time_march -- 1 32 1.0

use hdg5::basis::l2_error;
use hdg5::global::SolverOptions;
use hdg5::local::Var;
use hdg5::mesh::Mesh;
use hdg5::problem::{builtin_problem, BuiltinProblem};
use hdg5::stabilization::StabilizationConfig;
use hdg5::time::{paper_time_step, TimeIntegrator};

fn main() -> hdg5::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(32);
    let t_final: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let problem = builtin_problem(BuiltinProblem::P1);
    let mesh = Mesh::uniform(problem.domain.0, problem.domain.1, n, problem.boundary)?;
    let dt = paper_time_step(k, mesh.h());
    let mut ti = TimeIntegrator::new(&problem, &mesh, k, &StabilizationConfig::paper_periodic(), dt, SolverOptions::default())?;
    let every = ((t_final / dt).ceil() as usize / 10).max(1);
    let mut step = 0;
    println!("{:>8} {:>12} {:>12}", "t", "error", "||u_h||");
    let summary = ti.march(t_final, |s| {
        if step % every == 0 {
            let u = s.field.field(Var::U);
            let e = l2_error(|x| (x + s.t).sin(), &u, &mesh, k + 6);
            let norm = l2_error(|_| 0.0, &u, &mesh, k + 6);
            println!("{:>8.4} {:>12.3e} {:>12.6}", s.t, e, norm);
        }
        step += 1;
    })?;
    println!("{} steps of dt = {dt:.3e}", summary.steps);
    Ok(())
}
