//! Power transfer distribution factors of the 14-bus case: where does 1 MW
//! injected at a bus and withdrawn at the reference bus flow?

use iccopf::{dcgrid, mpcase};

fn main() {
    let case = mpcase::parse_case(mpcase::bundled("case14").unwrap()).unwrap();
    let reference = case.reference_bus().unwrap();
    let h = dcgrid::compute_ptdf(&case, reference).unwrap();
    let bus = 9;
    let col = case.bus_index(bus).unwrap();
    println!("1 MW from bus {bus} to bus {reference}:");
    for (l, br) in case.branches.iter().enumerate() {
        let f = h[(l, col)];
        if f.abs() > 1e-3 {
            println!("  line {:>2}-{:<2} {:+.4} MW", br.from_bus, br.to_bus, f);
        }
    }
}
