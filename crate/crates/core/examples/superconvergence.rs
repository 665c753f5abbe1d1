//! Distance to the HDG projection and nodal trace errors for the stationary
//! sine problem. Expect roughly `k + 2` and `2k + 1`.
//!
//!     cargo run --release --example superconvergence -- 2

use hdg5::stabilization::StabilizationConfig;
use hdg5::verification::superconvergence_study;

fn main() -> hdg5::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let levels = superconvergence_study(k, 3..=6, &StabilizationConfig::paper_periodic())?;
    let fmt = |v: Option<f64>| v.map_or("    -".into(), |r| format!("{r:5.2}"));
    println!("{:>4} {:>11} {:>5} {:>11} {:>5} {:>11} {:>5}", "N", "||Pi u-u_h||", "eoc", "|u_hat|", "eoc", "|s_hat|", "eoc");
    for l in &levels {
        println!(
            "{:>4} {:>11.3e} {} {:>11.3e} {} {:>11.3e} {}",
            l.n_elements,
            l.projected[0],
            fmt(l.projected_eoc[0]),
            l.traces[0],
            fmt(l.trace_eoc[0]),
            l.traces[4],
            fmt(l.trace_eoc[4]),
        );
    }
    Ok(())
}
