//! Slack norm and its sensitivity along the study direction of a bundled
//! scenario. The sensitivity switches on where the slack leaves zero.
//!
//! ```text
//! cargo run --release --example surrogate_curve -- case39
//! ```

use std::path::Path;

use iccopf::cli;
use iccopf::inverse::{self, InverseSettings};
use iccopf::surrogate;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "case14".into());
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let loaded = cli::load_scenario(&data.join(format!("scenarios/{name}.json"))).unwrap();
    let text = std::fs::read_to_string(data.join(format!("directions/{name}_lines.json"))).unwrap();
    let direction: cli::DirectionSpec = serde_json::from_str(&text).unwrap();
    let profile = direction.profile(&loaded.model).unwrap();
    let cap = inverse::cap_beta(&profile, InverseSettings::default().beta_cap).unwrap();

    println!("beta        slack norm    D_beta");
    for i in 0..=20 {
        let beta = cap * i as f64 / 20.0;
        let sol = surrogate::solve_surrogate(&loaded.model, &profile.with_beta(beta)).unwrap();
        println!("{beta:.6}  {:.6e}  {:.4}", sol.snorm, sol.d_beta);
    }
}
