//! Analytical sensitivity of the slack norm against central finite
//! differences on the 39-bus scenario, just past its boundary.

use std::path::Path;

use iccopf::cli;
use iccopf::inverse::{self, InverseSettings};
use iccopf::surrogate;

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let loaded = cli::load_scenario(&data.join("scenarios/case39.json")).unwrap();
    let text = std::fs::read_to_string(data.join("directions/case39_lines.json")).unwrap();
    let direction: cli::DirectionSpec = serde_json::from_str(&text).unwrap();
    let profile = direction.profile(&loaded.model).unwrap();
    let boundary = inverse::solve_inverse(&loaded.model, &profile, &InverseSettings::default()).unwrap().beta_max;
    println!("boundary at beta = {boundary:.8}");
    println!("offset  step    analytic      finite diff   rel err");
    for offset in [1e-3, 2e-3, 3e-3] {
        let p = profile.with_beta(boundary + offset);
        let analytic = surrogate::solve_surrogate(&loaded.model, &p).unwrap().d_beta;
        for step in [1e-3, 1e-5] {
            let fd = surrogate::fd_sensitivity(&loaded.model, &p, step).unwrap();
            println!("{offset:.0e}   {step:.0e}   {analytic:>11.4}   {fd:>11.4}   {:.3}%", 100.0 * ((analytic - fd) / fd).abs());
        }
    }
}
