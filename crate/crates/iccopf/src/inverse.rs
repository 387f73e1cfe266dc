//! The inverse problem: the largest `β` along a direction for which the
//! chance-constrained dispatch stays feasible.
//!
//! [`solve_inverse`] runs a damped Newton iteration on `snorm(β) = 0` from
//! the infeasible side,
//!
//! ```text
//! β̂ = β − η · snorm(β) / D_β
//! ```
//!
//! rejecting candidates whose sensitivity vanishes (they have crossed into
//! the feasible region) and halving `η` until a candidate lands outside it
//! again. [`solve_ccopf`] solves the forward problem and is used to confirm
//! that the result sits on the feasibility boundary.

use conic::{ConeProgram, ProgramBuilder, SocBlock, Status};
use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::dcgrid::CompactModel;
use crate::gaussmath;
use crate::surrogate::{self, SecurityProfile, SurrogateError, SurrogateSolution, BETA_LEVEL_MAX};

/// Tolerance for forward CC-OPF solves.
pub const CCOPF_TOLERANCE: f64 = 1e-8;

/// Width at which the bisection fallback stops.
const BISECTION_WIDTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error("direction has no positive entry")]
    DegenerateDirection,
    #[error("offset {level} of row {row} already exceeds the cap {cap}")]
    OffsetAboveCap { row: usize, level: f64, cap: f64 },
    #[error("the offsets alone are infeasible (slack norm {snorm:.3e} at beta = 0)")]
    OffsetInfeasible { snorm: f64 },
    #[error("verification step {0} must be positive")]
    Delta(f64),
    #[error("level vector has {got} entries for {expected} chance rows")]
    Levels { got: usize, expected: usize },
    #[error("security level {level} of row {row} outside [0.5, 1 - 1e-12)")]
    LevelDomain { row: usize, level: f64 },
    #[error("CC-OPF solve stopped with status {status} after {iterations} iterations")]
    Ccopf { status: Status, iterations: usize },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InverseSettings {
    /// Slack-norm tolerance `ε_s`.
    pub eps_s: f64,
    /// Sensitivity tolerance `ε_D`.
    pub eps_d: f64,
    /// Iteration budget `T`.
    pub max_iter: usize,
    /// Largest security level any row may reach.
    pub beta_cap: f64,
    /// Compare `D_β` against a finite difference just past `β_max`.
    pub fd_check: bool,
}

impl Default for InverseSettings {
    fn default() -> Self {
        Self {
            eps_s: 1e-6,
            eps_d: 1e-8,
            max_iter: 50,
            beta_cap: 1.0 - 1e-6,
            fd_check: false,
        }
    }
}

impl InverseSettings {
    pub fn validate(&self) -> Result<(), InverseError> {
        let bad = |m: &str| Err(InverseError::Settings(m.to_owned()));
        if !(self.eps_s > 0.0 && self.eps_s.is_finite()) {
            return bad("eps_s must be positive");
        }
        if !(self.eps_d > 0.0 && self.eps_d.is_finite()) {
            return bad("eps_d must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(0.5..BETA_LEVEL_MAX).contains(&self.beta_cap) {
            return bad("beta_cap must lie in [0.5, 1 - 1e-12)");
        }
        Ok(())
    }
}

/// One candidate evaluation of the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    pub beta: f64,
    pub snorm: f64,
    pub d_beta: f64,
    pub eta: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
    DirectionFeasibleAtCap,
    /// The starting point was infeasible yet had a vanishing sensitivity, so
    /// the result comes from bisection instead of the Newton iteration.
    BisectionFallback,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::IterationCap => "iteration_cap",
            Termination::DirectionFeasibleAtCap => "direction_feasible_at_cap",
            Termination::BisectionFallback => "bisection_fallback",
        })
    }
}

/// Analytical against finite-difference sensitivity at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityCheck {
    pub beta: f64,
    pub step: f64,
    pub analytic: f64,
    pub finite_difference: f64,
}

impl SensitivityCheck {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.finite_difference).abs() / self.finite_difference.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult {
    pub beta_max: f64,
    pub beta_levels_at_max: DVector<f64>,
    /// Slack norm of the surrogate at `beta_max`.
    pub snorm_at_max: f64,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Surrogate solves spent in the bisection fallback.
    pub fallback_solves: usize,
    pub sensitivity_check: Option<SensitivityCheck>,
}

impl InverseResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Starting point of the iteration: the largest `β` allowed by the cap and
/// the surrogate solved there.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub beta: f64,
    pub solution: SurrogateSolution,
}

/// The largest `β` keeping every `β_k ≤ beta_cap`.
pub fn cap_beta(profile: &SecurityProfile, beta_cap: f64) -> Result<f64, InverseError> {
    let mut best = f64::INFINITY;
    for k in 0..profile.len() {
        if profile.beta0[k] > beta_cap {
            return Err(InverseError::OffsetAboveCap {
                row: k,
                level: profile.beta0[k],
                cap: beta_cap,
            });
        }
        if profile.u[k] > 0.0 {
            best = best.min((beta_cap - profile.beta0[k]) / profile.u[k]);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(InverseError::DegenerateDirection)
    }
}

/// Computes `β⁰` and solves the surrogate there. The `beta` field of
/// `profile` is ignored.
pub fn initialize_beta(
    model: &CompactModel,
    profile: &SecurityProfile,
    settings: &InverseSettings,
) -> Result<InitialPoint, InverseError> {
    settings.validate()?;
    if profile.u.iter().all(|&v| v == 0.0) {
        return Err(InverseError::DegenerateDirection);
    }
    profile.validate_direction()?;
    let beta = cap_beta(profile, settings.beta_cap)?;
    let solution = surrogate::solve_surrogate(model, &profile.with_beta(beta))?;
    Ok(InitialPoint { beta, solution })
}

/// Finds `β_max` along `profile` (whose `beta` field is ignored).
pub fn solve_inverse(
    model: &CompactModel,
    profile: &SecurityProfile,
    settings: &InverseSettings,
) -> Result<InverseResult, InverseError> {
    let start = initialize_beta(model, profile, settings)?;
    let beta = start.beta;
    let snorm = start.solution.snorm;
    let d_beta = start.solution.d_beta;
    let mut trace = vec![IterationRecord {
        index: 0,
        beta,
        snorm,
        d_beta,
        eta: 1.0,
        accepted: true,
    }];
    let finish = |beta: f64, snorm: f64, trace, termination, fallback_solves, check| {
        Ok(InverseResult {
            beta_max: beta,
            beta_levels_at_max: surrogate::beta_levels(&profile.with_beta(beta))?,
            snorm_at_max: snorm,
            trace,
            termination,
            fallback_solves,
            sensitivity_check: check,
        })
    };

    if snorm <= settings.eps_s {
        return finish(beta, snorm, trace, Termination::DirectionFeasibleAtCap, 0, None);
    }
    let top = beta;
    let check = |at: f64| -> Result<Option<SensitivityCheck>, InverseError> {
        if settings.fd_check && at < top {
            Ok(Some(sensitivity_check(model, profile, at, top)?))
        } else {
            Ok(None)
        }
    };
    if d_beta.abs() <= settings.eps_d {
        let (lo, lo_snorm, solves) = bisect(model, profile, settings, 0.0, beta)?;
        return finish(lo, lo_snorm, trace, Termination::BisectionFallback, solves, check(lo)?);
    }

    let model_eval = |b: f64| -> Result<(f64, f64), InverseError> {
        let sol = surrogate::solve_surrogate(model, &profile.with_beta(b))?;
        if b == 0.0 && sol.snorm > settings.eps_s {
            return Err(InverseError::OffsetInfeasible { snorm: sol.snorm });
        }
        Ok((sol.snorm, sol.d_beta))
    };
    newton_iterate(&mut trace, settings, model_eval)?;
    let IterationRecord { beta, snorm, .. } = *trace.iter().rev().find(|r| r.accepted).expect("starting row is accepted");
    let termination = if snorm <= settings.eps_s {
        Termination::Converged
    } else {
        Termination::IterationCap
    };
    finish(beta, snorm, trace, termination, 0, check(beta)?)
}

/// Runs the damped Newton iteration from the last accepted row of `trace`,
/// appending one row per candidate. `eval` returns `(snorm, D_β)` at a
/// candidate `β`. Stops once the accepted slack norm is within `eps_s` or the
/// trace holds `max_iter` rows.
pub fn newton_iterate<F>(trace: &mut Vec<IterationRecord>, settings: &InverseSettings, mut eval: F) -> Result<(), InverseError>
where
    F: FnMut(f64) -> Result<(f64, f64), InverseError>,
{
    let mut last = *trace.iter().rev().find(|r| r.accepted).expect("trace starts with an accepted row");
    let mut eta = 1.0;
    let mut reset = true;
    loop {
        let t = trace.len();
        if t >= settings.max_iter || last.snorm <= settings.eps_s {
            return Ok(());
        }
        if reset {
            eta = 1.0;
        }
        let candidate = newton_candidate(last.beta, last.snorm, last.d_beta, eta);
        let (snorm, d_beta) = eval(candidate)?;
        let accepted = d_beta.abs() > settings.eps_d;
        let rec = IterationRecord {
            index: t,
            beta: candidate,
            snorm,
            d_beta,
            eta,
            accepted,
        };
        trace.push(rec);
        if accepted {
            last = rec;
            reset = true;
        } else {
            eta /= 2.0;
            reset = false;
        }
    }
}

/// `β − η · snorm / D_β`, clamped at zero.
pub fn newton_candidate(beta: f64, snorm: f64, d_beta: f64, eta: f64) -> f64 {
    (beta - eta * snorm / d_beta).max(0.0)
}

/// Bisection on `snorm(β) ≤ ε_s` over `[lo, hi]`, assuming `hi` is
/// infeasible. Returns the feasible end, its slack norm and the solve count.
fn bisect(
    model: &CompactModel,
    profile: &SecurityProfile,
    settings: &InverseSettings,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, f64, usize), InverseError> {
    let mut lo_snorm = surrogate::solve_surrogate(model, &profile.with_beta(lo))?.snorm;
    let mut solves = 1;
    if lo_snorm > settings.eps_s {
        return Err(InverseError::OffsetInfeasible { snorm: lo_snorm });
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let s = surrogate::solve_surrogate(model, &profile.with_beta(mid))?.snorm;
        solves += 1;
        if s <= settings.eps_s {
            lo = mid;
            lo_snorm = s;
        } else {
            hi = mid;
        }
    }
    Ok((lo, lo_snorm, solves))
}

/// Central finite difference of the slack norm one step past `beta_max`,
/// so the whole stencil lies on the infeasible side and below `top`.
fn sensitivity_check(
    model: &CompactModel,
    profile: &SecurityProfile,
    beta_max: f64,
    top: f64,
) -> Result<SensitivityCheck, InverseError> {
    let step = (1e-3f64).min(0.5 * (top - beta_max));
    let at = beta_max + step;
    let p = profile.with_beta(at);
    let analytic = surrogate::solve_surrogate(model, &p)?.d_beta;
    let finite_difference = surrogate::fd_sensitivity(model, &p, step)?;
    Ok(SensitivityCheck {
        beta: at,
        step,
        analytic,
        finite_difference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcopfSolution {
    pub x_star: DVector<f64>,
    /// `costᵀx*` in $/h; `NaN` when infeasible.
    pub cost: f64,
    pub feasible: bool,
    pub status: Status,
}

/// The CC-OPF at the levels in `beta_levels` as a cone program over `x`:
/// minimise `costᵀx` subject to the model's equalities and inequalities and
/// `‖φ_k Σ^{1/2}(M_k x + m_k)‖ ≤ d_k − w̄_kᵀx` per chance row.
pub fn build_ccopf(model: &CompactModel, beta_levels: &DVector<f64>) -> Result<ConeProgram, InverseError> {
    let rows = model.chance_rows.len();
    if beta_levels.len() != rows {
        return Err(InverseError::Levels {
            got: beta_levels.len(),
            expected: rows,
        });
    }
    if let Some(k) = beta_levels.iter().position(|b| !(0.5..BETA_LEVEL_MAX).contains(b)) {
        return Err(InverseError::LevelDomain {
            row: k,
            level: beta_levels[k],
        });
    }
    let n = model.dim();
    let root = &model.uncertainty.sigma_sqrt;
    let mut pb = ProgramBuilder::new(n);
    for (i, &c) in model.cost.iter().enumerate() {
        pb.set_objective(i, c);
    }
    for i in 0..model.a_eq.nrows() {
        pb.equality(model.a_eq.row(i).iter().copied().collect(), model.b_eq[i]);
    }
    for i in 0..model.e_ineq.nrows() {
        pb.linear(model.e_ineq.row(i).iter().copied().collect(), model.f_ineq[i]);
    }
    for (k, row) in model.chance_rows.iter().enumerate() {
        let phi = gaussmath::std_normal_icdf(beta_levels[k]).expect("level checked against the domain");
        if phi == 0.0 {
            pb.linear(row.mean_row.iter().copied().collect(), row.offset);
            continue;
        }
        pb.soc(SocBlock {
            rows: root * &row.noise_matrix * phi,
            offset: root * &row.noise_offset * phi,
            scalar_row: -&row.mean_row,
            scalar_offset: row.offset,
        });
    }
    Ok(pb.build())
}

/// Minimum-cost dispatch subject to every chance row at its level in
/// `beta_levels`, in second-order-cone form without slacks.
pub fn solve_ccopf(model: &CompactModel, beta_levels: &DVector<f64>) -> Result<CcopfSolution, InverseError> {
    let program = build_ccopf(model, beta_levels)?;
    let n = model.dim();
    let sol = conic::solve(&program, CCOPF_TOLERANCE).expect("CC-OPF program is well formed");
    // On the boundary itself the feasible set has no interior and the
    // iteration cannot certify optimality; the point it stopped at still
    // settles feasibility.
    let on_boundary = sol.status == Status::NumericalLimit && program.max_violation(&sol.z) <= CCOPF_TOLERANCE * rhs_scale(&program);
    match sol.status {
        Status::NumericalLimit if on_boundary => Ok(CcopfSolution {
            cost: model.cost.dot(&sol.z),
            x_star: sol.z,
            feasible: true,
            status: sol.status,
        }),
        Status::Optimal => Ok(CcopfSolution {
            cost: model.cost.dot(&sol.z),
            x_star: sol.z,
            feasible: true,
            status: sol.status,
        }),
        Status::PrimalInfeasible => Ok(CcopfSolution {
            x_star: DVector::from_element(n, f64::NAN),
            cost: f64::NAN,
            feasible: false,
            status: sol.status,
        }),
        status => Err(InverseError::Ccopf {
            status,
            iterations: sol.iterations,
        }),
    }
}

fn rhs_scale(p: &ConeProgram) -> f64 {
    let soc = p
        .soc
        .iter()
        .fold(0.0_f64, |acc, b| acc.max(b.scalar_offset.abs()).max(b.offset.amax()));
    1f64.max(p.eq_rhs.amax()).max(p.lin_rhs.amax()).max(soc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryCheck {
    pub below_feasible: bool,
    pub above_infeasible: bool,
}

impl BoundaryCheck {
    pub fn brackets(&self) -> bool {
        self.below_feasible && self.above_infeasible
    }
}

/// Solves the forward problem at `beta_max` and at `beta_max + delta`.
pub fn verify_boundary(
    model: &CompactModel,
    profile: &SecurityProfile,
    beta_max: f64,
    delta: f64,
) -> Result<BoundaryCheck, InverseError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(InverseError::Delta(delta));
    }
    let below = surrogate::beta_levels(&profile.with_beta(beta_max))?;
    let above = surrogate::beta_levels(&profile.with_beta(beta_max + delta))?;
    let (lo, hi) = rayon::join(|| solve_ccopf(model, &below), || solve_ccopf(model, &above));
    Ok(BoundaryCheck {
        below_feasible: lo?.feasible,
        above_infeasible: !hi?.feasible,
    })
}
