//! Size and sparsity of the condensed global system. Only the three traces
//! per node are global, so the pattern does not depend on `k`.

use hdg5::global::{HdgSolver, SolverOptions};
use hdg5::mesh::{BoundaryKind, Mesh};
use hdg5::problem::Flux;
use hdg5::stabilization::StabilizationConfig;

fn main() -> hdg5::Result<()> {
    let n = 16;
    let mesh = Mesh::uniform(0.0, 1.0, n, BoundaryKind::Periodic)?;
    for k in 0..=3 {
        let solver = HdgSolver::new(&mesh, k, 1.0, -1.0, Flux::zero(), &StabilizationConfig::paper_periodic(), 1.0, SolverOptions::default())?;
        let m = solver.global_matrix()?;
        let structural = solver.sparsity_pattern();
        let numeric = m.nonzero_pattern();
        assert!(numeric.iter().all(|ij| structural.contains(ij)));
        println!(
            "k = {k}: {0} x {0} unknowns, {1} structural entries ({2} numerically nonzero), {3} local unknowns per element",
            m.dim(),
            structural.len(),
            numeric.len(),
            5 * (k + 1)
        );
    }
    Ok(())
}
