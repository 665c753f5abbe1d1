//! A custom problem from TOML: `u_t + u_xxx - u_xxxxx + (u^2/2)_x = f` with
//! a manufactured travelling wave, marched on two meshes.

use hdg5::custom::CustomProblem;
use hdg5::global::SolverOptions;
use hdg5::mesh::Mesh;
use hdg5::stabilization::StabilizationConfig;
use hdg5::time::TimeIntegrator;
use hdg5::verification::error_norms;

const PROBLEM: &str = r#"
name = "kawahara"
domain = [0.0, 6.283185307179586]
boundary = "periodic"
alpha = 1.0
beta = -1.0
flux = [0.0, 0.0, 0.5]

[[exact]]
kind = "sin"
c = 0.5
a = 1.0
b = 1.0

[[exact]]
kind = "cos"
c = 0.1
a = 2.0
b = -1.0
"#;

fn main() -> hdg5::Result<()> {
    let spec = CustomProblem::from_toml(PROBLEM)?.to_spec()?;
    let exact = spec.exact.clone().unwrap();
    for n in [16, 32] {
        let mesh = Mesh::uniform(spec.domain.0, spec.domain.1, n, spec.boundary)?;
        let dt = 0.1 * mesh.h() * mesh.h();
        let mut ti = TimeIntegrator::new(&spec, &mesh, 2, &StabilizationConfig::paper_periodic(), dt, SolverOptions::default())?;
        let out = ti.march(0.1, |_| {})?;
        let e = error_norms(&out.state.field, &exact, out.state.t, &mesh, 8);
        println!("N = {n:>3}: e_u = {:.3e}, e_s = {:.3e}, Newton <= {}", e[0], e[4], out.max_newton_iterations);
    }
    Ok(())
}
