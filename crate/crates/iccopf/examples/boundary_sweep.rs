//! Trade-off between two line security levels on the 14-bus case: rotate the
//! direction through the quadrant and record where each ray leaves the
//! feasible region.

use iccopf::cli::{self, SweepSpec};
use iccopf::inverse::InverseSettings;

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/case14.json");
    let loaded = cli::load_scenario(&path).unwrap();
    let spec = SweepSpec {
        pair: ["line:4-9".into(), "line:5-6".into()],
        tau_grid: vec![0.1, 0.3, 1.0, 3.0, 10.0],
        beta0_list: vec![0.95, 0.97],
    };
    let rows = cli::run_sweep(&loaded.model, &spec, &InverseSettings::default(), None).unwrap();
    println!("beta0  tau    beta(4-9)  beta(5-6)");
    for r in &rows {
        match &r.outcome {
            Ok(res) => println!(
                "{:.2}   {:<5}  {:.6}   {:.6}",
                r.beta0, r.tau, res.beta_levels_at_max[r.pair[0]], res.beta_levels_at_max[r.pair[1]]
            ),
            Err(e) => println!("{:.2}   {:<5}  {e}", r.beta0, r.tau),
        }
    }
}
