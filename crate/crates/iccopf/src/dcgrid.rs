//! The compact chance-constrained DC model.
//!
//! Decision vector `x = [p_1..p_G, α_1..α_G]`: generator set-points in MW and
//! participation factors. Renewable injections deviate from their forecast by
//! `ω ~ N(0, Σ)` (per unit of `base_mva`), and every generator picks up the
//! share `α_g` of the aggregate deviation `Ω = 1ᵀω`. Each chance row then reads
//!
//! ```text
//! Pr{ w̄ᵀx + (M x + m)ᵀω ≤ d } ≥ β
//! ```
//!
//! whose Gaussian reformulation is `w̄ᵀx + Φ⁻¹(β)·‖Σ^{1/2}(M x + m)‖ ≤ d`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mpcase::NetworkCase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("renewable bus {0} does not exist in the case")]
    UnknownBus(u32),
    #[error("renewable forecast {forecast} MW is not below the scaled load {load} MW")]
    ForecastExceedsLoad { forecast: f64, load: f64 },
    #[error("a covariance needs at least one renewable bus")]
    NoRenewables,
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid model: {0}")]
    Model(String),
}

/// Scenario parameters layered on top of a network case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Bundled case name (`case14`, `case39`) or a path to a case file,
    /// resolved relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    pub load_scale: f64,
    /// `f^max = fraction · b_ij · base_mva`.
    pub flow_limit_fraction: f64,
    /// Same, for branches that are the only connection of a generator bus.
    pub stub_flow_limit_fraction: f64,
    pub renewable_buses: Vec<u32>,
    /// One value per renewable bus; omitted means zero forecast everywhere.
    #[serde(default)]
    pub renewable_forecast_mw: Vec<f64>,
    /// Variance of each renewable deviation, per unit squared.
    pub sigma_diag: f64,
    pub sigma_seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Forecasts with the zero default applied.
    pub fn forecasts(&self) -> Vec<f64> {
        if self.renewable_forecast_mw.is_empty() {
            vec![0.0; self.renewable_buses.len()]
        } else {
            self.renewable_forecast_mw.clone()
        }
    }

    pub fn validate(&self, case: &NetworkCase) -> Result<(), GridError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GridError::Scenario(format!("{name} must be positive, got {v}")))
            }
        };
        positive("load_scale", self.load_scale)?;
        positive("flow_limit_fraction", self.flow_limit_fraction)?;
        positive("stub_flow_limit_fraction", self.stub_flow_limit_fraction)?;
        positive("sigma_diag", self.sigma_diag)?;
        if self.renewable_buses.is_empty() {
            return Err(GridError::NoRenewables);
        }
        for (i, b) in self.renewable_buses.iter().enumerate() {
            if case.bus(*b).is_none() {
                return Err(GridError::UnknownBus(*b));
            }
            if self.renewable_buses[..i].contains(b) {
                return Err(GridError::Scenario(format!("renewable bus {b} listed twice")));
            }
        }
        if !self.renewable_forecast_mw.is_empty() && self.renewable_forecast_mw.len() != self.renewable_buses.len() {
            return Err(GridError::Scenario(format!(
                "{} forecasts for {} renewable buses",
                self.renewable_forecast_mw.len(),
                self.renewable_buses.len()
            )));
        }
        if let Some(v) = self.renewable_forecast_mw.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(GridError::Scenario(format!("renewable forecast {v} must be nonnegative")));
        }
        Ok(())
    }
}

/// Renewable covariance and its symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModel {
    pub renewable_count: usize,
    pub sigma: DMatrix<f64>,
    pub sigma_sqrt: DMatrix<f64>,
    /// Seed that produced `sigma`; differs from the requested seed only if a
    /// degenerate draw forced a resample.
    pub seed: u64,
}

impl UncertaintyModel {
    /// Wraps a symmetric positive semi-definite `sigma`, computing its
    /// symmetric square root. The seed is recorded as 0.
    pub fn from_covariance(sigma: DMatrix<f64>) -> Self {
        let eig = sigma.clone().symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        Self {
            renewable_count: sigma.nrows(),
            sigma_sqrt: (&root + root.transpose()) * 0.5,
            sigma,
            seed: 0,
        }
    }
}

/// Identifies a chance row by the grid element it protects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum ChanceKey {
    Generator { index: usize, bus: u32 },
    Branch { index: usize, from: u32, to: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceRow {
    pub key: ChanceKey,
    /// Text label: `gen:<bus>` or `line:<from>-<to>`, with `#n` appended to
    /// the second and later elements sharing the same label.
    pub label: String,
    pub mean_row: DVector<f64>,
    pub offset: f64,
    pub noise_matrix: DMatrix<f64>,
    pub noise_offset: DVector<f64>,
}

impl ChanceRow {
    /// `M x + m`, the coefficient vector of the renewable deviation.
    pub fn noise_coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.noise_matrix * x + &self.noise_offset
    }

    /// `ν(x) = ‖Σ^{1/2}(M x + m)‖`, the standard deviation of the row.
    pub fn nu(&self, x: &DVector<f64>, sigma_sqrt: &DMatrix<f64>) -> f64 {
        (sigma_sqrt * self.noise_coefficients(x)).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactModel {
    pub num_generators: usize,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub e_ineq: DMatrix<f64>,
    pub f_ineq: DVector<f64>,
    /// Generator rows first, then branch rows, both in case order.
    pub chance_rows: Vec<ChanceRow>,
    pub uncertainty: UncertaintyModel,
    pub cost: DVector<f64>,
}

impl CompactModel {
    pub fn dim(&self) -> usize {
        self.cost.len()
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.chance_rows.iter().position(|r| r.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.chance_rows.iter().map(|r| r.label.as_str())
    }

    /// Checks the dimensional invariants and that `A_eq` has full row rank.
    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.dim();
        let r = self.uncertainty.renewable_count;
        let bad = |what: String| Err(GridError::Model(what));
        if n == 0 {
            return bad("empty decision vector".into());
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad(format!("A_eq is {}x{}, b_eq has {}", self.a_eq.nrows(), self.a_eq.ncols(), self.b_eq.len()));
        }
        if self.e_ineq.ncols() != n || self.e_ineq.nrows() != self.f_ineq.len() {
            return bad(format!("E is {}x{}, f has {}", self.e_ineq.nrows(), self.e_ineq.ncols(), self.f_ineq.len()));
        }
        if self.uncertainty.sigma.shape() != (r, r) || self.uncertainty.sigma_sqrt.shape() != (r, r) {
            return bad("covariance shape differs from renewable count".into());
        }
        for row in &self.chance_rows {
            if row.mean_row.len() != n || row.noise_matrix.shape() != (r, n) || row.noise_offset.len() != r {
                return bad(format!("chance row {} has inconsistent dimensions", row.label));
            }
            if !row.offset.is_finite() {
                return bad(format!("chance row {} has a non-finite bound", row.label));
            }
        }
        if self.a_eq.nrows() > 0 {
            let svd = self.a_eq.clone().svd(false, false);
            let top = svd.singular_values.max();
            let rank = svd.singular_values.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count();
            if rank < self.a_eq.nrows() {
                return bad(format!("A_eq has rank {rank} < {} rows", self.a_eq.nrows()));
            }
        }
        Ok(())
    }
}

impl CompactModel {
    /// A model whose equalities pin `x = x0`, with the given chance rows and
    /// no other constraints. Handy for checking formulas by hand.
    pub fn pinned(x0: &DVector<f64>, uncertainty: UncertaintyModel, chance_rows: Vec<ChanceRow>) -> Result<Self, GridError> {
        let n = x0.len();
        let model = Self {
            num_generators: 0,
            a_eq: DMatrix::identity(n, n),
            b_eq: x0.clone(),
            e_ineq: DMatrix::zeros(0, n),
            f_ineq: DVector::zeros(0),
            chance_rows,
            uncertainty,
            cost: DVector::zeros(n),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Power transfer distribution factors, one row per branch and one column per
/// bus (case order): the flow on each branch, in MW, when 1 MW is injected at
/// the bus and withdrawn at `reference_bus`.
pub fn compute_ptdf(case: &NetworkCase, reference_bus: u32) -> Result<DMatrix<f64>, GridError> {
    let nb = case.buses.len();
    let index: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let r = *index
        .get(&reference_bus)
        .ok_or_else(|| GridError::Structural(format!("reference bus {reference_bus} does not exist")))?;
    let endpoints: Vec<(usize, usize)> = case
        .branches
        .iter()
        .map(|br| match (index.get(&br.from_bus), index.get(&br.to_bus)) {
            (Some(&f), Some(&t)) => Ok((f, t)),
            _ => Err(GridError::Structural(format!("branch {}-{} has a missing endpoint", br.from_bus, br.to_bus))),
        })
        .collect::<Result<_, _>>()?;

    // reduced position of every bus except the reference
    let reduced = |i: usize| if i < r { Some(i) } else if i > r { Some(i - 1) } else { None };
    let mut lap = DMatrix::zeros(nb - 1, nb - 1);
    for (br, &(f, t)) in case.branches.iter().zip(&endpoints) {
        let b = br.susceptance;
        if let Some(i) = reduced(f) {
            lap[(i, i)] += b;
        }
        if let Some(j) = reduced(t) {
            lap[(j, j)] += b;
        }
        if let (Some(i), Some(j)) = (reduced(f), reduced(t)) {
            lap[(i, j)] -= b;
            lap[(j, i)] -= b;
        }
    }
    let inv = if nb == 1 {
        DMatrix::zeros(0, 0)
    } else {
        lap.cholesky()
            .ok_or_else(|| GridError::Structural("reduced Laplacian is singular; the network is disconnected".into()))?
            .inverse()
    };
    let reactance_row = |i: usize, bus: usize| match (reduced(i), reduced(bus)) {
        (Some(a), Some(b)) => inv[(a, b)],
        _ => 0.0,
    };
    let mut ptdf = DMatrix::zeros(case.branches.len(), nb);
    for (l, (br, &(f, t))) in case.branches.iter().zip(&endpoints).enumerate() {
        for bus in 0..nb {
            ptdf[(l, bus)] = br.susceptance * (reactance_row(f, bus) - reactance_row(t, bus));
        }
    }
    Ok(ptdf)
}

/// Random covariance with a fixed diagonal: `Σ = diag · D^{-1/2} M Mᵀ D^{-1/2}`
/// for a seeded standard-normal `M`, `D` the diagonal of `M Mᵀ`.
pub fn sample_sigma(seed: u64, renewable_count: usize, diag: f64) -> Result<UncertaintyModel, GridError> {
    if renewable_count == 0 {
        return Err(GridError::NoRenewables);
    }
    if !(diag.is_finite() && diag > 0.0) {
        return Err(GridError::Scenario(format!("sigma_diag must be positive, got {diag}")));
    }
    let r = renewable_count;
    let mut used = seed;
    let s = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(used);
        let m = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = &m * m.transpose();
        if s.diagonal().iter().all(|v| *v > 0.0) {
            break s;
        }
        used = used.wrapping_add(1);
    };
    let scale: Vec<f64> = s.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut sigma = DMatrix::zeros(r, r);
    for i in 0..r {
        sigma[(i, i)] = diag;
        for j in 0..i {
            let v = diag * scale[i] * s[(i, j)] * scale[j];
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    Ok(UncertaintyModel {
        seed: used,
        ..UncertaintyModel::from_covariance(sigma)
    })
}

/// Instantiates the compact model of `case` under `scenario`.
pub fn build_compact(case: &NetworkCase, scenario: &Scenario) -> Result<CompactModel, GridError> {
    scenario.validate(case)?;
    let base = case.base_mva;
    let nb = case.buses.len();
    let g_count = case.generators.len();
    let n = 2 * g_count;
    let r_count = scenario.renewable_buses.len();
    let bus_index: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();

    let load = DVector::from_iterator(nb, case.buses.iter().map(|b| b.load_mw * scenario.load_scale));
    let forecasts = scenario.forecasts();
    let mut forecast = DVector::zeros(nb);
    for (bus, f) in scenario.renewable_buses.iter().zip(&forecasts) {
        forecast[bus_index[bus]] += f;
    }
    let total_load = load.sum();
    let total_forecast = forecast.sum();
    if total_forecast >= total_load {
        return Err(GridError::ForecastExceedsLoad {
            forecast: total_forecast,
            load: total_load,
        });
    }

    let reference = case
        .reference_bus()
        .ok_or_else(|| GridError::Structural("case has no reference bus".into()))?;
    let ptdf = compute_ptdf(case, reference)?;
    let base_flow = &ptdf * (&forecast - &load);
    let limits: Vec<f64> = case
        .branches
        .iter()
        .map(|br| {
            let fraction = if br.is_generator_stub {
                scenario.stub_flow_limit_fraction
            } else {
                scenario.flow_limit_fraction
            };
            fraction * br.susceptance * base
        })
        .collect();
    let gen_bus: Vec<usize> = case.generators.iter().map(|g| bus_index[&g.bus]).collect();
    let ren_bus: Vec<usize> = scenario.renewable_buses.iter().map(|b| bus_index[b]).collect();

    let mut a_eq = DMatrix::zeros(2, n);
    a_eq.view_mut((0, 0), (1, g_count)).fill(1.0);
    a_eq.view_mut((1, g_count), (1, g_count)).fill(1.0);
    let b_eq = DVector::from_vec(vec![total_load - total_forecast, 1.0]);

    let nl = case.branches.len();
    let mut e_ineq = DMatrix::zeros(3 * g_count + nl, n);
    let mut f_ineq = DVector::zeros(3 * g_count + nl);
    for (g, gen) in case.generators.iter().enumerate() {
        e_ineq[(g, g)] = -1.0;
        f_ineq[g] = -gen.p_min_mw;
        e_ineq[(g_count + g, g_count + g)] = -1.0;
        e_ineq[(2 * g_count + g, g_count + g)] = 1.0;
        f_ineq[2 * g_count + g] = 1.0;
    }
    for l in 0..nl {
        let row = 3 * g_count + l;
        for (g, &bus) in gen_bus.iter().enumerate() {
            e_ineq[(row, g)] = -ptdf[(l, bus)];
        }
        f_ineq[row] = limits[l] + base_flow[l];
    }

    let mut chance_rows = Vec::with_capacity(g_count + nl);
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut label = |text: String| {
        let count = seen.entry(text.clone()).or_default();
        *count += 1;
        if *count == 1 {
            text
        } else {
            format!("{text}#{count}")
        }
    };
    for (g, gen) in case.generators.iter().enumerate() {
        let mut mean_row = DVector::zeros(n);
        mean_row[g] = 1.0;
        let mut noise_matrix = DMatrix::zeros(r_count, n);
        noise_matrix.column_mut(g_count + g).fill(-base);
        chance_rows.push(ChanceRow {
            key: ChanceKey::Generator { index: g, bus: gen.bus },
            label: label(format!("gen:{}", gen.bus)),
            mean_row,
            offset: gen.p_max_mw,
            noise_matrix,
            noise_offset: DVector::zeros(r_count),
        });
    }
    for (l, br) in case.branches.iter().enumerate() {
        let mut mean_row = DVector::zeros(n);
        let mut noise_matrix = DMatrix::zeros(r_count, n);
        for (g, &bus) in gen_bus.iter().enumerate() {
            mean_row[g] = ptdf[(l, bus)];
            noise_matrix.column_mut(g_count + g).fill(-base * ptdf[(l, bus)]);
        }
        let noise_offset = DVector::from_iterator(r_count, ren_bus.iter().map(|&b| base * ptdf[(l, b)]));
        chance_rows.push(ChanceRow {
            key: ChanceKey::Branch {
                index: l,
                from: br.from_bus,
                to: br.to_bus,
            },
            label: label(format!("line:{}-{}", br.from_bus, br.to_bus)),
            mean_row,
            offset: limits[l] - base_flow[l],
            noise_matrix,
            noise_offset,
        });
    }

    let mut cost = DVector::zeros(n);
    for (g, gen) in case.generators.iter().enumerate() {
        cost[g] = gen.cost_linear;
    }

    let model = CompactModel {
        num_generators: g_count,
        a_eq,
        b_eq,
        e_ineq,
        f_ineq,
        chance_rows,
        uncertainty: sample_sigma(scenario.sigma_seed, r_count, scenario.sigma_diag)?,
        cost,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpcase::{Branch, Bus, BusKind, Generator};

    fn line(from: u32, to: u32, x: f64) -> Branch {
        Branch {
            from_bus: from,
            to_bus: to,
            reactance: x,
            susceptance: 1.0 / x,
            flow_limit_mw: f64::INFINITY,
            is_generator_stub: false,
        }
    }

    fn two_bus() -> NetworkCase {
        NetworkCase {
            base_mva: 100.0,
            buses: vec![
                Bus { id: 1, kind: BusKind::Reference, load_mw: 0.0 },
                Bus { id: 2, kind: BusKind::Load, load_mw: 50.0 },
            ],
            branches: vec![line(1, 2, 0.1)],
            generators: vec![Generator { bus: 1, p_min_mw: 0.0, p_max_mw: 100.0, cost_linear: 10.0 }],
        }
    }

    #[test]
    fn single_line_carries_everything_back() {
        let ptdf = compute_ptdf(&two_bus(), 1).unwrap();
        assert_eq!(ptdf.column(0).amax(), 0.0);
        assert!((ptdf[(0, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn chance_row_bounds_match_flow() {
        let scenario = Scenario {
            case: None,
            load_scale: 1.0,
            flow_limit_fraction: 0.5,
            stub_flow_limit_fraction: 0.5,
            renewable_buses: vec![2],
            renewable_forecast_mw: vec![10.0],
            sigma_diag: 0.1,
            sigma_seed: 3,
        };
        let model = build_compact(&two_bus(), &scenario).unwrap();
        assert_eq!(model.b_eq[0], 40.0);
        let line = &model.chance_rows[1];
        assert_eq!(line.label, "line:1-2");
        // flow 1->2 = p - 0 ... = 40 MW at balance; limit 0.5 * 10 * 100
        assert!((line.offset - (500.0 - 40.0)).abs() < 1e-9);
        assert!((line.mean_row[0] - 0.0).abs() < 1e-15);
        assert!((line.noise_offset[0] + 100.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_labels_are_numbered() {
        let mut case = two_bus();
        case.branches.push(line(1, 2, 0.2));
        let scenario = Scenario {
            case: None,
            load_scale: 1.0,
            flow_limit_fraction: 1.0,
            stub_flow_limit_fraction: 1.0,
            renewable_buses: vec![2],
            renewable_forecast_mw: vec![],
            sigma_diag: 0.1,
            sigma_seed: 0,
        };
        let model = build_compact(&case, &scenario).unwrap();
        let labels: Vec<&str> = model.labels().collect();
        assert_eq!(labels, ["gen:1", "line:1-2", "line:1-2#2"]);
    }

    #[test]
    fn forecast_above_load_rejected() {
        let scenario = Scenario {
            case: None,
            load_scale: 1.0,
            flow_limit_fraction: 1.0,
            stub_flow_limit_fraction: 1.0,
            renewable_buses: vec![2],
            renewable_forecast_mw: vec![60.0],
            sigma_diag: 0.1,
            sigma_seed: 0,
        };
        assert!(matches!(build_compact(&two_bus(), &scenario), Err(GridError::ForecastExceedsLoad { .. })));
    }
}
