//! Error/EOC table for one builtin problem, in the CSV format of the CLI.
//!
//!     cargo run --release --example convergence_table -- P2 2 3 6

use hdg5::problem::{builtin_problem, BuiltinProblem};
use hdg5::mesh::BoundaryKind;
use hdg5::stabilization::StabilizationConfig;
use hdg5::verification::{run_convergence_study, DtPolicy};

fn main() -> hdg5::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let id = args.get(1).and_then(|s| BuiltinProblem::parse(s)).unwrap_or(BuiltinProblem::P1);
    let k: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let a: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let b: u32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(6);

    let problem = builtin_problem(id);
    let cfg = match problem.boundary {
        BoundaryKind::Periodic => StabilizationConfig::paper_periodic(),
        BoundaryKind::Dirichlet => StabilizationConfig::paper_dirichlet(),
    };
    let report = run_convergence_study(&problem, k, a..=b, DtPolicy::Paper, &cfg, 0.1)?;
    print!("{}", report.to_csv());
    eprintln!("max Newton iterations per step: {}", report.max_newton_iterations());
    Ok(())
}
