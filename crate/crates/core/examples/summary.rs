//! Runs a scenario in closed loop and with feedback off, then prints the
//! headline numbers.
//!
//! cargo run --release -p ressim --example summary -- scenarios/scenario1.toml

use std::path::PathBuf;
use std::time::Instant;

use ressim::scenario::{load_scenario, run_mode, ControlMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "scenarios/scenario1.toml".into())
        .into();
    let sc = load_scenario(&path)?;
    print!("{}", sc.report);
    println!(
        "gains k1 = {:.4e}, k2 = {:.4e}, beta0 = {:.4e}, gamma1_0 R*_0 = {:.4}",
        sc.controller.gains.k1, sc.controller.gains.k2, sc.controller.beta0, sc.map.gamma1_0_rstar_0
    );
    for mode in [ControlMode::ClosedLoop, ControlMode::DemandOnly] {
        let start = Instant::now();
        let rec = run_mode(&sc, mode)?;
        let last = rec.len() - 1;
        println!("\n{mode}: {} samples in {:.1?}", rec.len(), start.elapsed());
        for k in (0..rec.len()).step_by(rec.len() / 16).chain([last]) {
            let qmax = rec.q[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            println!(
                "t {:6.2}  y_u {:?}  y_R {:?}  |sigma| {:.3e}  events {:.2}  |Q|max {:.3e}",
                rec.t[k],
                rec.y_u[k].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
                rec.y_r[k].iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
                rec.sigma[k].iter().map(|v| v * v).sum::<f64>().sqrt(),
                rec.events[k],
                qmax
            );
        }
        println!(
            "events {:.3} vs background {:.3}; demand mismatch {:.2e}; max mass residual {:.2e}",
            rec.events[last],
            rec.background_events()[last],
            rec.demand_mismatch(),
            rec.mass_residual.iter().copied().fold(0.0, f64::max)
        );
    }
    Ok(())
}
