use iccopf::mpcase::{self, BusKind, CaseError, NetworkCase};
use proptest::prelude::*;

fn bundled(name: &str) -> NetworkCase {
    mpcase::parse_case(mpcase::bundled(name).unwrap()).unwrap()
}

/// Counts rows of `mpc.<name> = [ ... ];` by hand, skipping comments and
/// out-of-service rows (the status column is `status_col`, 0-based).
fn raw_rows(text: &str, name: &str, status_col: Option<usize>) -> usize {
    let start = text.find(&format!("mpc.{name} = [")).unwrap();
    let body = &text[start..];
    let body = &body[body.find('[').unwrap() + 1..body.find("];").unwrap()];
    body.lines()
        .map(|l| l.split('%').next().unwrap().trim().trim_end_matches(';'))
        .filter(|l| !l.is_empty())
        .filter(|l| match status_col {
            Some(c) => l.split_whitespace().nth(c).map(|v| v.parse::<f64>().unwrap() != 0.0).unwrap(),
            None => true,
        })
        .count()
}

#[test]
fn case14_counts() {
    let case = bundled("case14");
    assert_eq!((case.buses.len(), case.branches.len(), case.generators.len()), (14, 20, 5));
}

#[test]
fn case39_counts() {
    let case = bundled("case39");
    assert_eq!((case.buses.len(), case.branches.len(), case.generators.len()), (39, 46, 10));
}

#[test]
fn counts_match_raw_matrices() {
    for name in ["case14", "case39"] {
        let text = mpcase::bundled(name).unwrap();
        let case = bundled(name);
        assert_eq!(case.buses.len(), raw_rows(text, "bus", None), "{name}");
        assert_eq!(case.branches.len(), raw_rows(text, "branch", Some(10)), "{name}");
        assert_eq!(case.generators.len(), raw_rows(text, "gen", Some(7)), "{name}");
    }
}

#[test]
fn one_reference_bus_each() {
    for name in ["case14", "case39"] {
        let case = bundled(name);
        let refs = case.buses.iter().filter(|b| b.kind == BusKind::Reference).count();
        assert_eq!(refs, 1, "{name}");
    }
}

#[test]
fn susceptance_is_reciprocal_reactance() {
    for br in bundled("case39").branches {
        assert!((br.susceptance * br.reactance - 1.0).abs() < 1e-12);
        assert_ne!(br.from_bus, br.to_bus);
    }
}

#[test]
fn validate_is_identity_on_bundled_cases() {
    for name in ["case14", "case39"] {
        let case = bundled(name);
        assert_eq!(mpcase::validate(case.clone()).unwrap(), case);
    }
}

#[test]
fn round_trip_bundled() {
    for name in ["case14", "case39"] {
        let case = bundled(name);
        let again = mpcase::parse_case(&mpcase::serialize_case(&case)).unwrap();
        assert_eq!(again, case, "{name}");
    }
}

fn two_bus(bus_rows: &str, gen_bus: u32) -> String {
    format!(
        "function mpc = t\nmpc.version = '2';\nmpc.baseMVA = 100;\n\
         mpc.bus = [\n{bus_rows}];\n\
         mpc.gen = [\n {gen_bus} 0 0 0 0 1 100 1 200 0\n];\n\
         mpc.branch = [\n 1 2 0.01 0.2 0 150 0 0 0 0 1\n];\n\
         mpc.gencost = [\n 2 0 0 2 20 0\n];\n"
    )
}

#[test]
fn minimal_text_parses() {
    let case = mpcase::parse_case(&two_bus(" 1 3 0;\n 2 1 90;\n", 1)).unwrap();
    assert_eq!(case.total_load_mw(), 90.0);
    assert_eq!(case.branches[0].susceptance, 5.0);
    assert_eq!(case.branches[0].flow_limit_mw, 150.0);
    assert_eq!(case.generators[0].cost_linear, 20.0);
    assert_eq!(case.reference_bus(), Some(1));
}

#[test]
fn two_reference_buses_is_semantic_error() {
    let err = mpcase::parse_case(&two_bus(" 1 3 0;\n 2 3 90;\n", 1)).unwrap_err();
    assert!(matches!(err, CaseError::Semantic { .. }), "{err}");
}

#[test]
fn missing_reference_bus_is_semantic_error() {
    let err = mpcase::parse_case(&two_bus(" 1 2 0;\n 2 1 90;\n", 1)).unwrap_err();
    assert!(matches!(err, CaseError::Semantic { .. }), "{err}");
}

#[test]
fn generator_on_unknown_bus() {
    let err = mpcase::parse_case(&two_bus(" 1 3 0;\n 2 1 90;\n", 7)).unwrap_err();
    assert!(matches!(err, CaseError::Semantic { .. }), "{err}");
    assert!(err.to_string().contains('7'), "{err}");
}

#[test]
fn duplicate_bus_id() {
    let err = mpcase::parse_case(&two_bus(" 1 3 0;\n 2 1 90;\n 2 1 10;\n", 1)).unwrap_err();
    assert!(err.to_string().contains("duplicate"), "{err}");
}

#[test]
fn disconnected_bus() {
    let err = mpcase::parse_case(&two_bus(" 1 3 0;\n 2 1 90;\n 3 1 10;\n", 1)).unwrap_err();
    assert!(err.to_string().contains("bus 3"), "{err}");
}

#[test]
fn dangling_branch_endpoint() {
    let text = two_bus(" 1 3 0;\n 2 1 90;\n", 1).replace(" 1 2 0.01", " 1 4 0.01");
    assert!(matches!(mpcase::parse_case(&text).unwrap_err(), CaseError::Semantic { .. }));
}

#[test]
fn unterminated_matrix_is_syntax_error() {
    let err = mpcase::parse_case("mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0;\n").unwrap_err();
    assert!(matches!(err, CaseError::Syntax { .. }), "{err}");
}

prop_compose! {
    fn chain_case()(n in 2usize..8)
        (loads in prop::collection::vec(0.0f64..500.0, n),
         reactances in prop::collection::vec(0.01f64..1.0, n - 1),
         limits in prop::collection::vec(prop_oneof![Just(0.0), 10.0f64..900.0], n - 1),
         pmax in 50.0f64..900.0,
         cost in 0.0f64..60.0,
         reference in 0..n)
        -> String
    {
        let mut s = String::from("mpc.baseMVA = 100;\nmpc.bus = [\n");
        for (i, load) in loads.iter().enumerate() {
            let kind = if i == reference { 3 } else { 1 };
            s += &format!(" {} {kind} {load};\n", i + 1);
        }
        s += "];\nmpc.gen = [\n";
        s += &format!(" {} 0 0 0 0 1 100 1 {pmax} 0;\n];\nmpc.branch = [\n", reference + 1);
        for (i, (x, lim)) in reactances.iter().zip(&limits).enumerate() {
            s += &format!(" {} {} 0 {x} 0 {lim} 0 0 0 0 1;\n", i + 1, i + 2);
        }
        s += &format!("];\nmpc.gencost = [\n 2 0 0 2 {cost} 0;\n];\n");
        s
    }
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(text in chain_case()) {
        let case = mpcase::parse_case(&text).unwrap();
        let again = mpcase::parse_case(&mpcase::serialize_case(&case)).unwrap();
        prop_assert_eq!(again, case);
    }
}
