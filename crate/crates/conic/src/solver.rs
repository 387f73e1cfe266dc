//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling.
//!
//! The program is put in the standard form
//!
//! ```text
//! minimize cᵀx   s.t.  A x = b,   G x + s = h,   s ∈ K
//! ```
//!
//! with `K` a product of one nonnegative orthant (the linear rows) and the
//! second-order cones. The embedding
//!
//! ```text
//! 0 = Aᵀy + Gᵀz + cτ
//! 0 = A x − bτ
//! s = hτ − G x
//! κ = −cᵀx − bᵀy − hᵀz
//! ```
//!
//! is driven to a solution with a Mehrotra predictor-corrector. Either
//! `τ > 0` (an optimal pair is `(x, y, z)/τ`) or `κ > 0`, in which case the
//! iterate carries a Farkas certificate of primal or dual infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::cones::{Block, Cones, Scaling};
use crate::error::ProgramError;
use crate::kkt::KktSystem;
use crate::program::ConeProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::NumericalLimit => "numerical_limit",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Relative primal/dual residual and gap tolerance.
    pub tolerance: f64,
    /// Threshold on the normalised Farkas residual for declaring infeasibility.
    pub infeasibility_tolerance: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    pub refinement_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            infeasibility_tolerance: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
            refinement_steps: 8,
        }
    }
}

impl Settings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

/// Result of [`solve`]. At [`Status::Optimal`] the vectors hold the primal
/// optimum and its multipliers; at an infeasibility status they hold the
/// normalised certificate (primal side for dual infeasibility, dual side for
/// primal infeasibility).
#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: Status,
    pub z: DVector<f64>,
    /// Multipliers of the equality rows.
    pub eq_duals: DVector<f64>,
    /// Multipliers of the linear rows, one per row, nonnegative.
    pub lin_duals: DVector<f64>,
    /// Slack `h_lin − G_lin z` of the linear rows.
    pub lin_slacks: DVector<f64>,
    /// Dual cone point for each second-order-cone block.
    pub soc_duals: Vec<DVector<f64>>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `|objective − dual_objective|`
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Solves `program` with default settings and the given tolerance.
pub fn solve(program: &ConeProgram, tolerance: f64) -> Result<ConeSolution, ProgramError> {
    solve_with(program, &Settings::with_tolerance(tolerance))
}

#[derive(Clone)]
struct Data {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
}

/// The program in standard form, both as given and after equilibration.
///
/// The scaled data are `c̃ = ρ·D c`, `Ã = E_a A D`, `b̃ = E_a b`,
/// `G̃ = E_g G D`, `h̃ = E_g h` with positive diagonals `D`, `E_a`, `E_g`
/// (`E_g` constant on each second-order-cone block so the cone is preserved)
/// and a scalar cost scale `ρ`.
struct StandardForm {
    orig: Data,
    scaled: Data,
    cones: Cones,
    col: DVector<f64>,
    row_eq: DVector<f64>,
    row_cone: DVector<f64>,
    cost_scale: f64,
}

impl StandardForm {
    fn new(p: &ConeProgram) -> Self {
        let n = p.dim();
        let cones = Cones::new(p.num_linear(), p.soc.iter().map(|b| b.cone_dim()));
        let mut g = DMatrix::zeros(cones.dim, n);
        let mut h = DVector::zeros(cones.dim);
        let l = p.num_linear();
        g.view_mut((0, 0), (l, n)).copy_from(&p.lin_matrix);
        h.rows_mut(0, l).copy_from(&p.lin_rhs);
        let mut row = l;
        for block in &p.soc {
            g.row_mut(row).copy_from(&(-block.scalar_row.transpose()));
            h[row] = block.scalar_offset;
            let k = block.rows.nrows();
            g.view_mut((row + 1, 0), (k, n)).copy_from(&(-&block.rows));
            h.rows_mut(row + 1, k).copy_from(&block.offset);
            row += k + 1;
        }
        let orig = Data {
            c: p.objective.clone(),
            a: p.eq_matrix.clone(),
            b: p.eq_rhs.clone(),
            g,
            h,
        };
        equilibrate(orig, cones)
    }

    /// Maps an iterate of the scaled program back to the original one.
    fn unscale(&self, it: &Iterate) -> Iterate {
        let rho = self.cost_scale;
        Iterate {
            x: it.x.component_mul(&self.col),
            y: it.y.component_mul(&self.row_eq) / rho,
            z: it.z.component_mul(&self.row_cone) / rho,
            s: it.s.component_div(&self.row_cone),
            tau: it.tau,
            kappa: it.kappa / rho,
        }
    }
}

/// Ruiz equilibration: repeatedly divide every column and row by the square
/// root of its largest entry.
fn equilibrate(orig: Data, cones: Cones) -> StandardForm {
    const PASSES: usize = 15;
    const BOUND: f64 = 1e4;
    let n = orig.c.len();
    let (p, m) = (orig.a.nrows(), orig.g.nrows());
    let mut a = orig.a.clone();
    let mut g = orig.g.clone();
    let mut col = DVector::from_element(n, 1.0);
    let mut row_eq = DVector::from_element(p, 1.0);
    let mut row_cone = DVector::from_element(m, 1.0);
    let factor = |norm: f64| if norm > 0.0 { 1.0 / norm.sqrt() } else { 1.0 };
    for _ in 0..PASSES {
        let dc = DVector::from_fn(n, |j, _| {
            let norm = a.column(j).amax().max(g.column(j).amax());
            factor(norm)
        });
        let de = DVector::from_fn(p, |i, _| factor(a.row(i).amax()));
        let mut dg = DVector::from_fn(m, |i, _| factor(g.row(i).amax()));
        for block in &cones.blocks {
            if let Block::Soc { start, len } = *block {
                let norm = (start..start + len).map(|i| g.row(i).amax()).fold(0.0, f64::max);
                dg.rows_mut(start, len).fill(factor(norm));
            }
        }
        let clamp = |total: &mut DVector<f64>, step: &mut DVector<f64>| {
            for (t, s) in total.iter_mut().zip(step.iter_mut()) {
                let next = (*t * *s).clamp(1.0 / BOUND, BOUND);
                *s = next / *t;
                *t = next;
            }
        };
        let (mut dc, mut de, mut dg) = (dc, de, dg);
        clamp(&mut col, &mut dc);
        clamp(&mut row_eq, &mut de);
        clamp(&mut row_cone, &mut dg);
        for j in 0..n {
            a.column_mut(j).scale_mut(dc[j]);
            g.column_mut(j).scale_mut(dc[j]);
        }
        for i in 0..p {
            a.row_mut(i).scale_mut(de[i]);
        }
        for i in 0..m {
            g.row_mut(i).scale_mut(dg[i]);
        }
    }
    let c = orig.c.component_mul(&col);
    let c_norm = c.amax();
    let cost_scale = if c_norm > 0.0 { (1.0 / c_norm).clamp(1.0 / BOUND, BOUND) } else { 1.0 };
    let scaled = Data {
        c: c * cost_scale,
        a,
        b: orig.b.component_mul(&row_eq),
        g,
        h: orig.h.component_mul(&row_cone),
    };
    StandardForm {
        orig,
        scaled,
        cones,
        col,
        row_eq,
        row_cone,
        cost_scale,
    }
}

#[derive(Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Step {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

pub fn solve_with(program: &ConeProgram, settings: &Settings) -> Result<ConeSolution, ProgramError> {
    program.validate()?;
    if !(1e-10..=1e-4).contains(&settings.tolerance) {
        return Err(ProgramError::Tolerance(settings.tolerance));
    }
    let sf = StandardForm::new(program);
    Ok(run(program, &sf, settings))
}

fn run(program: &ConeProgram, sf: &StandardForm, settings: &Settings) -> ConeSolution {
    let Data { c, a, b, g, h } = &sf.scaled;
    let cones = &sf.cones;
    let tol = settings.tolerance;
    let degree = cones.degree as f64;
    let e = cones.identity();

    let mut it = match initial_point(sf, settings) {
        Some(it) => it,
        None => return finish(program, sf, None, Status::NumericalLimit, 0),
    };

    let mut stalled = 0;
    let mut best: Option<(f64, Iterate)> = None;
    for iter in 0..settings.max_iter {
        let rx = a.tr_mul(&it.y) + g.tr_mul(&it.z) + c * it.tau;
        let ry = a * &it.x - b * it.tau;
        let rz = g * &it.x + &it.s - h * it.tau;
        let rt = it.kappa + c.dot(&it.x) + b.dot(&it.y) + h.dot(&it.z);

        // convergence is judged on the original data
        let orig = &sf.orig;
        let u = sf.unscale(&it);
        let aty = orig.a.tr_mul(&u.y);
        let gtz = orig.g.tr_mul(&u.z);
        let ax = &orig.a * &u.x;
        let gx = &orig.g * &u.x;
        let (p_scale, d_scale) = residual_scales(orig, &ax, &gx, &u.s, &aty, &gtz, u.tau);
        let ctx = orig.c.dot(&u.x);
        let bty = orig.b.dot(&u.y) + orig.h.dot(&u.z);
        let pcost = ctx / u.tau;
        let dcost = -bty / u.tau;
        let pres = (&ax - &orig.b * u.tau).norm().max((&gx + &u.s - &orig.h * u.tau).norm()) / u.tau / p_scale;
        let dres = (&aty + &gtz + &orig.c * u.tau).norm() / u.tau / d_scale;
        let gap = u.s.dot(&u.z) / (u.tau * u.tau);
        let gap_scale = pcost.abs().min(dcost.abs()).max(1.0);
        if pres <= tol && dres <= tol && gap <= tol * gap_scale && (pcost - dcost).abs() <= tol * gap_scale {
            return finish(program, sf, Some(&it), Status::Optimal, iter);
        }
        // Near the optimum rounding can push the residuals back up; keep the
        // most accurate iterate and stop once the error clearly grows. A
        // collapsing tau means the iterates head for a certificate instead.
        let merit = (pres.max(dres) / tol).max(gap.max((pcost - dcost).abs()) / (tol * gap_scale));
        if !merit.is_finite() {
            let fallback = best.as_ref().map(|(_, b)| b);
            return finish(program, sf, fallback, Status::NumericalLimit, iter);
        }
        match &best {
            Some((m, b)) if merit > 1e3 * m && *m < 1e3 && it.tau > 0.1 * b.tau => {
                return finish(program, sf, Some(b), Status::NumericalLimit, iter);
            }
            Some((m, _)) if merit >= *m => {}
            _ => best = Some((merit, it.clone())),
        }
        if bty < 0.0 {
            let farkas = (&aty + &gtz).norm() / -bty;
            if farkas <= settings.infeasibility_tolerance && it.tau < it.kappa {
                return finish(program, sf, Some(&it), Status::PrimalInfeasible, iter);
            }
        }
        if ctx < 0.0 {
            let ray = ax.norm().max((&gx + &u.s).norm()) / -ctx;
            if ray <= settings.infeasibility_tolerance && it.tau < it.kappa {
                return finish(program, sf, Some(&it), Status::DualInfeasible, iter);
            }
        }

        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (degree + 1.0);
        let scaling = Scaling::nesterov_todd(cones, &it.s, &it.z);
        let lambda = scaling.apply(&it.z, false);
        let Some(kkt) = KktSystem::factor(a, g, &scaling, settings.refinement_steps) else {
            return finish(program, sf, Some(best.as_ref().map_or(&it, |(_, b)| b)), Status::NumericalLimit, iter);
        };
        let Some(u1) = kkt.solve(&-c, b, h) else {
            return finish(program, sf, Some(best.as_ref().map_or(&it, |(_, b)| b)), Status::NumericalLimit, iter);
        };
        let denom = c.dot(&u1.x) + b.dot(&u1.y) + h.dot(&u1.z) - it.kappa / it.tau;

        let newton = |eta: f64, ds: &DVector<f64>, dk: f64| -> Option<Step> {
            let v = cones.inverse_product(&lambda, ds);
            let wv = scaling.apply(&v, false);
            let u0 = kkt.solve(&(&rx * -eta), &(&ry * -eta), &(&rz * -eta - &wv))?;
            let num = -eta * rt - dk / it.tau - (c.dot(&u0.x) + b.dot(&u0.y) + h.dot(&u0.z));
            let dtau = num / denom;
            let x = u0.x + &u1.x * dtau;
            let y = u0.y + &u1.y * dtau;
            let z = u0.z + &u1.z * dtau;
            let s = scaling.apply(&(v - scaling.apply(&z, false)), false);
            let dkappa = (dk - it.kappa * dtau) / it.tau;
            Some(Step {
                x,
                y,
                z,
                s,
                tau: dtau,
                kappa: dkappa,
            })
        };

        let max_step = |d: &Step| -> f64 {
            let mut alpha = cones.max_step(&it.s, &d.s).min(cones.max_step(&it.z, &d.z));
            if d.tau < 0.0 {
                alpha = alpha.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                alpha = alpha.min(-it.kappa / d.kappa);
            }
            alpha
        };

        // predictor
        let ds_aff = -cones.product(&lambda, &lambda);
        let Some(aff) = newton(1.0, &ds_aff, -it.tau * it.kappa) else {
            return finish(program, sf, Some(best.as_ref().map_or(&it, |(_, b)| b)), Status::NumericalLimit, iter);
        };
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let ws = scaling.apply(&aff.s, true);
        let wz = scaling.apply(&aff.z, false);
        let ds = &ds_aff - cones.product(&ws, &wz) + &e * (sigma * mu);
        let dk = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
        let Some(step) = newton(1.0 - sigma, &ds, dk) else {
            return finish(program, sf, Some(best.as_ref().map_or(&it, |(_, b)| b)), Status::NumericalLimit, iter);
        };
        let alpha = (settings.step_fraction * max_step(&step)).min(1.0);
        if !alpha.is_finite() || alpha < 1e-10 {
            stalled += 1;
            if stalled >= 5 || !alpha.is_finite() {
                return finish(program, sf, Some(best.as_ref().map_or(&it, |(_, b)| b)), Status::NumericalLimit, iter);
            }
        } else {
            stalled = 0;
        }

        it.x += &step.x * alpha;
        it.y += &step.y * alpha;
        it.z += &step.z * alpha;
        it.s += &step.s * alpha;
        it.tau += step.tau * alpha;
        it.kappa += step.kappa * alpha;
    }
    let last = best.as_ref().map_or(&it, |(_, b)| b);
    finish(program, sf, Some(last), Status::NumericalLimit, settings.max_iter)
}

/// Normalisers for the primal and dual residuals: the largest of 1, the
/// data norms and the norms of the terms that make up each residual.
fn residual_scales(
    sf: &Data,
    ax: &DVector<f64>,
    gx: &DVector<f64>,
    s: &DVector<f64>,
    aty: &DVector<f64>,
    gtz: &DVector<f64>,
    tau: f64,
) -> (f64, f64) {
    let p = [sf.b.norm(), sf.h.norm(), ax.norm() / tau, gx.norm() / tau, s.norm() / tau]
        .into_iter()
        .fold(1.0, f64::max);
    let d = [sf.c.norm(), aty.norm() / tau, gtz.norm() / tau].into_iter().fold(1.0, f64::max);
    (p, d)
}

fn initial_point(sf: &StandardForm, settings: &Settings) -> Option<Iterate> {
    let Data { c, a, b, g, h } = &sf.scaled;
    let cones = &sf.cones;
    let n = c.len();
    let identity = Scaling::identity(cones);
    let kkt = KktSystem::factor(a, g, &identity, settings.refinement_steps)?;
    // least-norm primal slack and least-norm dual point
    let primal = kkt.solve(&DVector::zeros(n), b, h)?;
    let dual = kkt.solve(&-c, &DVector::zeros(b.len()), &DVector::zeros(h.len()))?;
    let mut s = -primal.z;
    let mut z = dual.z;
    let e = cones.identity();
    for v in [&mut s, &mut z] {
        let shift = cones.min_shift(v);
        if shift >= -1e-8 * v.norm().max(1.0) {
            *v += &e * (1.0 + shift);
        }
    }
    Some(Iterate {
        x: primal.x,
        y: dual.y,
        z,
        s,
        tau: 1.0,
        kappa: 1.0,
    })
}

fn finish(
    program: &ConeProgram,
    sf: &StandardForm,
    it: Option<&Iterate>,
    status: Status,
    iterations: usize,
) -> ConeSolution {
    let n = program.dim();
    let l = program.num_linear();
    let m = sf.cones.dim;
    let d = &sf.orig;
    let (x, y, z, s) = match it {
        None => (
            DVector::zeros(n),
            DVector::zeros(d.b.len()),
            DVector::zeros(m),
            DVector::zeros(m),
        ),
        Some(it) => {
            let it = sf.unscale(it);
            let scale = match status {
                Status::Optimal | Status::NumericalLimit => it.tau,
                Status::PrimalInfeasible => -(d.b.dot(&it.y) + d.h.dot(&it.z)),
                Status::DualInfeasible => -d.c.dot(&it.x),
            };
            (&it.x / scale, &it.y / scale, &it.z / scale, &it.s / scale)
        }
    };
    let objective = d.c.dot(&x);
    let dual_objective = -d.b.dot(&y) - d.h.dot(&z);
    let (ax, gx, aty, gtz) = (&d.a * &x, &d.g * &x, d.a.tr_mul(&y), d.g.tr_mul(&z));
    let (p_scale, d_scale) = residual_scales(d, &ax, &gx, &s, &aty, &gtz, 1.0);
    let primal_residual = (ax - &d.b).norm().max((gx + &s - &d.h).norm()) / p_scale;
    let dual_residual = (aty + gtz + &d.c).norm() / d_scale;
    let mut soc_duals = Vec::with_capacity(program.soc.len());
    let mut row = l;
    for block in &program.soc {
        let k = block.cone_dim();
        soc_duals.push(z.rows(row, k).into_owned());
        row += k;
    }
    ConeSolution {
        status,
        lin_slacks: &program.lin_rhs - &program.lin_matrix * &x,
        z: x,
        eq_duals: y,
        lin_duals: z.rows(0, l).into_owned(),
        soc_duals,
        objective,
        dual_objective,
        gap: (objective - dual_objective).abs(),
        primal_residual,
        dual_residual,
        iterations,
    }
}
