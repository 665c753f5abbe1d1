//! The HDG projection `Pi` of `(sin, cos, -sin, -cos, sin)`: its distance to
//! the exact functions converges at `k + 1`, and projecting a field that is
//! already piecewise polynomial of degree `k` changes nothing.

use hdg5::basis::ReferenceBasis;
use hdg5::mesh::{BoundaryKind, Mesh};
use hdg5::stabilization::StabilizationConfig;
use hdg5::verification::{eoc, hdg_project, ProjectionSystem};

fn main() -> hdg5::Result<()> {
    let cfg = StabilizationConfig::paper_periodic();
    println!("Delta = {}", ProjectionSystem::new(&cfg)?.determinant());
    let fs: [&dyn Fn(f64) -> f64; 5] = [&f64::sin, &f64::cos, &|x| -x.sin(), &|x| -x.cos(), &f64::sin];
    for k in 1..=3 {
        let basis = ReferenceBasis::new(k, false);
        let mut prev: Option<f64> = None;
        print!("k = {k}:");
        for n in 3..=6 {
            let mesh = Mesh::uniform(0.0, 2.0 * std::f64::consts::PI, 1 << n, BoundaryKind::Periodic)?;
            let pi = hdg_project(fs, &mesh, &basis, &cfg)?;
            let e = hdg5::basis::l2_error(f64::sin, &pi.field(hdg5::local::Var::U), &mesh, k + 8);
            match prev.and_then(|p| eoc(p, e)) {
                Some(r) => print!("  {e:.2e} ({r:.2})"),
                None => print!("  {e:.2e}"),
            }
            prev = Some(e);
        }
        println!();
    }

    // x^2 on [0, 1] with k = 2 is reproduced exactly.
    let mesh = Mesh::uniform(0.0, 1.0, 4, BoundaryKind::Periodic)?;
    let basis = ReferenceBasis::new(2, false);
    let quad: [&dyn Fn(f64) -> f64; 5] = [&|x| x * x, &|x| 2.0 * x, &|_| 2.0, &|_| 0.0, &|_| 0.0];
    let pi = hdg_project(quad, &mesh, &basis, &cfg)?;
    let e = hdg5::basis::l2_error(|x| x * x, &pi.field(hdg5::local::Var::U), &mesh, 8);
    println!("||Pi x^2 - x^2|| = {e:.1e}");
    Ok(())
}
