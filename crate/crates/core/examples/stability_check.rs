//! Check stabilization presets against the L2-stability conditions.

use hdg5::stabilization::{check_stability, StabilityVerdict, StabilizationConfig};

fn main() -> hdg5::Result<()> {
    let cases = [
        ("paper-periodic, alpha=0", StabilizationConfig::paper_periodic(), 0.0),
        ("paper-periodic, alpha=1", StabilizationConfig::paper_periodic(), 1.0),
        ("paper-dirichlet, alpha=1", StabilizationConfig::paper_dirichlet(), 1.0),
        ("boundary preset, alpha=1", StabilizationConfig::boundary_preset(1.0, -1.0), 1.0),
        ("all zero, alpha=1", StabilizationConfig::zero(), 1.0),
    ];
    for (name, cfg, alpha) in cases {
        match check_stability(&cfg, alpha, -1.0)? {
            StabilityVerdict::Pass => println!("{name:<28} PASS"),
            StabilityVerdict::Fail(v) => {
                println!("{name:<28} FAIL");
                for c in v {
                    println!("    {c}");
                }
            }
        }
    }
    Ok(())
}
