#![allow(dead_code)]

use std::path::{Path, PathBuf};

use iccopf::cli::{self, LoadedScenario, SweepRow};
use iccopf::dcgrid::{ChanceKey, ChanceRow, CompactModel, UncertaintyModel};
use iccopf::surrogate::{self, SecurityProfile};
use nalgebra::{DMatrix, DVector};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn scenario_path(name: &str) -> PathBuf {
    data_dir().join("scenarios").join(format!("{name}.json"))
}

pub fn load(name: &str) -> LoadedScenario {
    cli::load_scenario(&scenario_path(name)).expect("bundled scenario loads")
}

/// The pair of lines whose boundary each bundled scenario is studied on.
pub fn study_pair(name: &str) -> (&'static str, &'static str) {
    match name {
        "case14" => ("line:4-9", "line:5-6"),
        "case39" => ("line:2-3", "line:23-24"),
        _ => panic!("no study pair for {name}"),
    }
}

/// `u_{k₁} = 1/√(1+τ²)`, `u_{k₂} = τ/√(1+τ²)`, common offset `beta0`.
pub fn pair_profile(model: &CompactModel, a: &str, b: &str, tau: f64, beta0: f64) -> SecurityProfile {
    let rows = model.chance_rows.len();
    let mut u = DVector::zeros(rows);
    let n = (1.0 + tau * tau).sqrt();
    u[model.row_index(a).expect("row a")] = 1.0 / n;
    u[model.row_index(b).expect("row b")] = tau / n;
    SecurityProfile::new(u, DVector::from_element(rows, beta0), 0.0).expect("valid profile")
}

pub fn study_profile(name: &str, model: &CompactModel) -> SecurityProfile {
    let (a, b) = study_pair(name);
    pair_profile(model, a, b, 1.0, 0.95)
}

/// One generator whose set-point `p0` and participation factor `alpha` are
/// pinned, one chance row `p ≤ d` whose noise is `−α ω` with `Var ω = var`.
pub struct Toy {
    pub model: CompactModel,
    pub profile: SecurityProfile,
    pub p0: f64,
    pub d: f64,
    /// `ν(x₀) = α √var`
    pub nu: f64,
}

pub fn toy(p0: f64, alpha: f64, d: f64, var: f64) -> Toy {
    let row = ChanceRow {
        key: ChanceKey::Generator { index: 0, bus: 1 },
        label: "gen:1".into(),
        mean_row: DVector::from_vec(vec![1.0, 0.0]),
        offset: d,
        noise_matrix: DMatrix::from_row_slice(1, 2, &[0.0, -1.0]),
        noise_offset: DVector::zeros(1),
    };
    let x0 = DVector::from_vec(vec![p0, alpha]);
    let model = CompactModel::pinned(&x0, UncertaintyModel::from_covariance(DMatrix::from_element(1, 1, var)), vec![row]).expect("toy model");
    let profile = SecurityProfile::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.5), 0.0).unwrap();
    Toy {
        model,
        profile,
        p0,
        d,
        nu: alpha * var.sqrt(),
    }
}

/// `erf` from its Maclaurin series, summed until the terms vanish.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x * x / n;
        let add = term / (2.0 * n + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

pub fn cdf_series(phi: f64) -> f64 {
    0.5 * (1.0 + erf_series(phi / std::f64::consts::SQRT_2))
}

/// `Φ⁻¹(beta)` by bisection on the series CDF.
pub fn icdf_bisect(beta: f64) -> f64 {
    let (mut lo, mut hi) = (-6.0, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf_series(mid) < beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `β` in `[lo, hi]` with `snorm(β) ≤ eps`, by plain bisection.
pub fn bisect_boundary(model: &CompactModel, profile: &SecurityProfile, mut lo: f64, mut hi: f64, eps: f64) -> f64 {
    let snorm = |b: f64| surrogate::solve_surrogate(model, &profile.with_beta(b)).expect("surrogate solves").snorm;
    assert!(snorm(lo) <= eps, "lower end must be feasible");
    assert!(snorm(hi) > eps, "upper end must be infeasible");
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if snorm(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn direction_path(name: &str) -> PathBuf {
    data_dir().join("directions").join(format!("{name}_lines.json"))
}

pub fn sweep_spec_path(name: &str) -> PathBuf {
    data_dir().join("sweeps").join(format!("{name}.json"))
}

/// Boundary points `(β_k1, β_k2)` of one offset group, in grid order.
pub fn group(rows: &[SweepRow], beta0: f64) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.beta0 == beta0)
        .map(|r| {
            let res = r.outcome.as_ref().expect("sweep point solved");
            (res.beta_levels_at_max[r.pair[0]], res.beta_levels_at_max[r.pair[1]])
        })
        .collect()
}

/// `β_k2` must not increase with `β_k1`: whenever one point lies further
/// along `k1` (by more than 1e-9), it lies no further along `k2`.
pub fn check_tradeoff(points: &[(f64, f64)]) -> Result<(), String> {
    for a in points {
        for b in points {
            if b.0 > a.0 + 1e-9 && b.1 > a.1 + 1e-9 {
                return Err(format!("{a:?} then {b:?}"));
            }
        }
    }
    Ok(())
}

/// Every boundary point of the `inner` group is feasible for the model with
/// all other rows at `outer_beta0`, and the extents of `inner` are smaller.
pub fn check_containment(model: &CompactModel, pair: [usize; 2], outer: &[(f64, f64)], outer_beta0: f64, inner: &[(f64, f64)]) -> Result<(), String> {
    let max = |pts: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    if max(inner, |p| p.0) > max(outer, |p| p.0) + 1e-9 || max(inner, |p| p.1) > max(outer, |p| p.1) + 1e-9 {
        return Err("inner extents exceed outer extents".into());
    }
    let rows = model.chance_rows.len();
    for &(b1, b2) in inner {
        let mut beta0 = DVector::from_element(rows, outer_beta0);
        beta0[pair[0]] = b1;
        beta0[pair[1]] = b2;
        let mut u = DVector::zeros(rows);
        u[pair[0]] = 1.0;
        let p = SecurityProfile::new(u, beta0, 0.0).map_err(|e| e.to_string())?;
        let snorm = surrogate::solve_surrogate(model, &p).map_err(|e| e.to_string())?.snorm;
        if snorm > 1e-6 {
            return Err(format!("({b1}, {b2}) has slack norm {snorm} at offset {outer_beta0}"));
        }
    }
    Ok(())
}
