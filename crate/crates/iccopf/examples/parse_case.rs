//! Parse a MATPOWER case (bundled name or path) and summarise it.
//!
//! ```text
//! cargo run --example parse_case -- case39
//! ```

use iccopf::mpcase;

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "case14".into());
    let text = match mpcase::bundled(&arg) {
        Some(t) => t.to_owned(),
        None => std::fs::read_to_string(&arg).expect("readable case file"),
    };
    let case = match mpcase::parse_case(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{arg}: {e}");
            std::process::exit(2);
        }
    };
    println!("{arg}: {} buses, {} branches, {} generators", case.buses.len(), case.branches.len(), case.generators.len());
    println!("base {} MVA, reference bus {:?}, total load {:.1} MW", case.base_mva, case.reference_bus(), case.total_load_mw());
    let capacity: f64 = case.generators.iter().map(|g| g.p_max_mw).sum();
    println!("generation capacity {capacity:.1} MW");
    for g in &case.generators {
        println!("  gen at bus {:>3}: {:>7.1} MW max, {:>6.2} $/MWh", g.bus, g.p_max_mw, g.cost_linear);
    }
}
