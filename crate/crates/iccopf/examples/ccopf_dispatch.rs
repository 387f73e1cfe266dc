//! Cost of the chance-constrained dispatch on the 14-bus case as every row's
//! security level rises, until the problem turns infeasible.

use iccopf::cli;
use iccopf::inverse;
use nalgebra::DVector;

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios/case14.json");
    let model = cli::load_scenario(&path).unwrap().model;
    let g = model.num_generators;
    println!("level   cost ($/h)   participation factors");
    for level in [0.5, 0.8, 0.9, 0.95, 0.97, 0.98, 0.99] {
        let levels = DVector::from_element(model.chance_rows.len(), level);
        let sol = inverse::solve_ccopf(&model, &levels).unwrap();
        if sol.feasible {
            let alpha: Vec<String> = sol.x_star.rows(g, g).iter().map(|a| format!("{a:.3}")).collect();
            println!("{level:.2}    {:>10.2}   {}", sol.cost, alpha.join(" "));
        } else {
            println!("{level:.2}    infeasible");
        }
    }
}
