//! Largest feasible security level along the study direction of a bundled
//! scenario, confirmed with the forward chance-constrained dispatch.
//!
//! ```text
//! cargo run --release --example find_boundary -- case39
//! ```

use std::path::Path;

use iccopf::cli;
use iccopf::inverse::{self, InverseSettings};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case14".into());
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let loaded = cli::load_scenario(&data.join(format!("scenarios/{name}.json"))).unwrap();
    let text = std::fs::read_to_string(data.join(format!("directions/{name}_lines.json"))).unwrap();
    let direction: cli::DirectionSpec = serde_json::from_str(&text).unwrap();
    let profile = direction.profile(&loaded.model).unwrap();

    let res = inverse::solve_inverse(&loaded.model, &profile, &InverseSettings::default()).unwrap();
    print!("{}", cli::trace_csv(&res.trace));
    println!("{}: beta_max = {:.9} ({})", name, res.beta_max, res.termination);
    for (k, label) in loaded.model.labels().enumerate() {
        if profile.u[k] > 0.0 {
            println!("  {label}: {:.7}", res.beta_levels_at_max[k]);
        }
    }
    let check = inverse::verify_boundary(&loaded.model, &profile, res.beta_max, 1e-5).unwrap();
    println!("feasible at beta_max: {}, infeasible 1e-5 beyond: {}", check.below_feasible, check.above_infeasible);
}
