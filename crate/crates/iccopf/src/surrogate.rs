//! The slack surrogate and the sensitivity of its optimal value.
//!
//! For fixed security levels the surrogate
//!
//! ```text
//! min ‖s‖  s.t.  A x = b,  E x ≤ f,  s ≥ 0,
//!                w̄_kᵀx − s_k + φ_k ν_k(x) ≤ d_k   (dual λ_k)
//! ```
//!
//! is always feasible, and its optimal value is zero exactly when the
//! chance-constrained dispatch is feasible. It is solved as a cone program in
//! the variables `(x, s, t, σ)` with `ν_k(x) ≤ t_k` and `‖s‖ ≤ σ`.

use conic::{ConeProgram, ProgramBuilder, SocBlock, Status};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dcgrid::CompactModel;
use crate::gaussmath::{self, GaussError, BETA_EPS};

/// Largest security level a profile may request.
pub const BETA_LEVEL_MAX: f64 = 1.0 - BETA_EPS;

/// Tolerance handed to the cone solver for surrogate solves.
pub const SURROGATE_TOLERANCE: f64 = 1e-10;

/// A solve that stalls short of [`SURROGATE_TOLERANCE`] is still used when
/// its best iterate meets this looser bound.
pub const SURROGATE_ACCEPT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("invalid profile: {0}")]
    Profile(String),
    #[error("security level {level} of row {row} outside [0.5, 1 - 1e-12)")]
    Domain { row: usize, level: f64 },
    #[error(transparent)]
    Gauss(#[from] GaussError),
    #[error("cone solver stopped with status {status} after {iterations} iterations (primal residual {primal_residual:.2e}, dual residual {dual_residual:.2e}, gap {gap:.2e})")]
    Solver {
        status: Status,
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },
    #[error("finite-difference step {0} must be positive")]
    Step(f64),
}

/// `β_k = beta · u_k + β₀,k` along a unit direction `u ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityProfile {
    pub u: DVector<f64>,
    pub beta0: DVector<f64>,
    pub beta: f64,
}

impl SecurityProfile {
    /// Builds and checks a profile.
    pub fn new(u: DVector<f64>, beta0: DVector<f64>, beta: f64) -> Result<Self, SurrogateError> {
        let p = Self { u, beta0, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Direction and offsets only; `beta` is checked by [`beta_levels`].
    /// A profile over no rows has nothing to normalise and is accepted.
    pub fn validate_direction(&self) -> Result<(), SurrogateError> {
        let bad = |m: String| Err(SurrogateError::Profile(m));
        if self.u.len() != self.beta0.len() {
            return bad(format!("{} direction entries but {} offsets", self.u.len(), self.beta0.len()));
        }
        if let Some(k) = self.u.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad(format!("direction entry {k} is {} (must be nonnegative)", self.u[k]));
        }
        if !self.u.is_empty() && (self.u.norm() - 1.0).abs() > 1e-9 {
            return bad(format!("direction has norm {} (must be 1)", self.u.norm()));
        }
        if let Some(k) = self.beta0.iter().position(|b| !(0.5..1.0).contains(b)) {
            return bad(format!("offset {k} is {} (must lie in [0.5, 1))", self.beta0[k]));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        self.validate_direction()?;
        beta_levels(self).map(|_| ())
    }
}

/// Per-row security levels of `profile`.
pub fn beta_levels(profile: &SecurityProfile) -> Result<DVector<f64>, SurrogateError> {
    if !(profile.beta.is_finite() && profile.beta >= 0.0) {
        return Err(SurrogateError::Profile(format!("beta {} must be nonnegative", profile.beta)));
    }
    let levels = &profile.u * profile.beta + &profile.beta0;
    if let Some(k) = levels.iter().position(|b| !(0.5..BETA_LEVEL_MAX).contains(b)) {
        return Err(SurrogateError::Domain { row: k, level: levels[k] });
    }
    Ok(levels)
}

/// Column layout of the surrogate cone program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateLayout {
    pub n_x: usize,
    pub rows: usize,
}

impl SurrogateLayout {
    pub fn s(&self, k: usize) -> usize {
        self.n_x + k
    }
    pub fn t(&self, k: usize) -> usize {
        self.n_x + self.rows + k
    }
    pub fn sigma(&self) -> usize {
        self.n_x + 2 * self.rows
    }
    pub fn dim(&self) -> usize {
        self.n_x + 2 * self.rows + 1
    }
}

/// The surrogate program together with the bookkeeping needed to read it.
#[derive(Debug, Clone)]
pub struct SurrogateProgram {
    pub program: ConeProgram,
    pub layout: SurrogateLayout,
    /// Linear-row index of chance row `k` (its dual is `λ_k`).
    pub chance_row_index: Vec<usize>,
    pub phi: DVector<f64>,
}

/// Assembles the surrogate cone program for the levels in `profile`.
pub fn build_surrogate(model: &CompactModel, profile: &SecurityProfile) -> Result<SurrogateProgram, SurrogateError> {
    let rows = model.chance_rows.len();
    if profile.len() != rows {
        return Err(SurrogateError::Profile(format!(
            "profile has {} entries for {rows} chance rows",
            profile.len()
        )));
    }
    profile.validate_direction()?;
    let levels = beta_levels(profile)?;
    let phi = levels.map(|b| gaussmath::std_normal_icdf(b).expect("level checked against the domain"));
    let n_x = model.dim();
    let layout = SurrogateLayout { n_x, rows };
    let n = layout.dim();
    let root = &model.uncertainty.sigma_sqrt;

    let mut pb = ProgramBuilder::new(n);
    pb.set_objective(layout.sigma(), 1.0);
    let widen = |row: &[f64]| {
        let mut v = vec![0.0; n];
        v[..row.len()].copy_from_slice(row);
        v
    };
    for i in 0..model.a_eq.nrows() {
        let row: Vec<f64> = model.a_eq.row(i).iter().copied().collect();
        pb.equality(widen(&row), model.b_eq[i]);
    }
    for i in 0..model.e_ineq.nrows() {
        let row: Vec<f64> = model.e_ineq.row(i).iter().copied().collect();
        pb.linear(widen(&row), model.f_ineq[i]);
    }
    let mut chance_row_index = Vec::with_capacity(rows);
    for (k, row) in model.chance_rows.iter().enumerate() {
        let mut v = widen(row.mean_row.as_slice());
        v[layout.s(k)] = -1.0;
        v[layout.t(k)] = phi[k];
        chance_row_index.push(pb.linear(v, row.offset));
    }
    for k in 0..rows {
        let mut v = vec![0.0; n];
        v[layout.s(k)] = -1.0;
        pb.linear(v, 0.0);
    }
    for (k, row) in model.chance_rows.iter().enumerate() {
        if phi[k] == 0.0 {
            // t_k would be free; pin it so the program stays bounded
            let mut v = vec![0.0; n];
            v[layout.t(k)] = 1.0;
            pb.equality(v, 0.0);
            continue;
        }
        let mut block_rows = DMatrix::zeros(root.nrows(), n);
        block_rows.view_mut((0, 0), (root.nrows(), n_x)).copy_from(&(root * &row.noise_matrix));
        let mut scalar_row = DVector::zeros(n);
        scalar_row[layout.t(k)] = 1.0;
        pb.soc(SocBlock {
            rows: block_rows,
            offset: root * &row.noise_offset,
            scalar_row,
            scalar_offset: 0.0,
        });
    }
    let mut s_rows = DMatrix::zeros(rows, n);
    for k in 0..rows {
        s_rows[(k, layout.s(k))] = 1.0;
    }
    let mut sigma_row = DVector::zeros(n);
    sigma_row[layout.sigma()] = 1.0;
    pb.soc(SocBlock {
        rows: s_rows,
        offset: DVector::zeros(rows),
        scalar_row: sigma_row,
        scalar_offset: 0.0,
    });
    Ok(SurrogateProgram {
        program: pb.build(),
        layout,
        chance_row_index,
        phi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSolution {
    pub x_star: DVector<f64>,
    pub s_star: DVector<f64>,
    /// `‖s*‖₂`
    pub snorm: f64,
    pub lambda_star: DVector<f64>,
    pub phi: DVector<f64>,
    /// `ν_k(x*)`, recomputed from `x*`.
    pub nu: DVector<f64>,
    /// `D_β`, the derivative of `snorm` along the profile direction.
    pub d_beta: f64,
    pub status: Status,
    pub iterations: usize,
}

impl SurrogateSolution {
    /// Slack of chance row `k` in its reformulated form at the optimum:
    /// `d_k − w̄_kᵀx* + s_k* − φ_k ν_k`.
    pub fn row_slack(&self, model: &CompactModel, k: usize) -> f64 {
        let row = &model.chance_rows[k];
        row.offset - row.mean_row.dot(&self.x_star) + self.s_star[k] - self.phi[k] * self.nu[k]
    }
}

/// Solves the surrogate at the levels in `profile` and evaluates `D_β`.
pub fn solve_surrogate(model: &CompactModel, profile: &SecurityProfile) -> Result<SurrogateSolution, SurrogateError> {
    let sp = build_surrogate(model, profile)?;
    let sol = conic::solve(&sp.program, SURROGATE_TOLERANCE).expect("surrogate program is well formed");
    let close = sol.status == Status::NumericalLimit
        && sol.primal_residual.max(sol.dual_residual) <= SURROGATE_ACCEPT
        && sol.gap <= SURROGATE_ACCEPT * sol.objective.abs().max(1.0);
    if sol.status != Status::Optimal && !close {
        return Err(SurrogateError::Solver {
            status: sol.status,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            gap: sol.gap,
        });
    }
    let layout = sp.layout;
    let x_star = sol.z.rows(0, layout.n_x).into_owned();
    let s_star = sol.z.rows(layout.n_x, layout.rows).map(|v| v.max(0.0));
    let lambda_star = DVector::from_iterator(layout.rows, sp.chance_row_index.iter().map(|&i| sol.lin_duals[i].max(0.0)));
    let root = &model.uncertainty.sigma_sqrt;
    let nu = DVector::from_iterator(layout.rows, model.chance_rows.iter().map(|r| r.nu(&x_star, root)));
    let mut out = SurrogateSolution {
        snorm: s_star.norm(),
        x_star,
        s_star,
        lambda_star,
        phi: sp.phi,
        nu,
        d_beta: 0.0,
        status: sol.status,
        iterations: sol.iterations,
    };
    out.d_beta = compute_sensitivity(&out, profile)?;
    Ok(out)
}

/// `D_β = √(2π) Σ_k u_k λ_k ν_k exp(φ_k²/2)`.
pub fn compute_sensitivity(sol: &SurrogateSolution, profile: &SecurityProfile) -> Result<f64, SurrogateError> {
    let mut total = 0.0;
    for k in 0..profile.len() {
        let weight = sol.lambda_star[k] * sol.nu[k];
        if weight == 0.0 || profile.u[k] == 0.0 {
            continue;
        }
        total += weight * gaussmath::dphi_dbeta(sol.phi[k], profile.u[k])?;
    }
    Ok(total)
}

/// Central difference `(snorm(β+h) − snorm(β−h)) / 2h` from two fresh solves.
pub fn fd_sensitivity(model: &CompactModel, profile: &SecurityProfile, step: f64) -> Result<f64, SurrogateError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(SurrogateError::Step(step));
    }
    let up = profile.with_beta(profile.beta + step);
    let down = profile.with_beta(profile.beta - step);
    beta_levels(&up)?;
    beta_levels(&down)?;
    let (hi, lo) = rayon::join(|| solve_surrogate(model, &up), || solve_surrogate(model, &down));
    Ok((hi?.snorm - lo?.snorm) / (2.0 * step))
}
