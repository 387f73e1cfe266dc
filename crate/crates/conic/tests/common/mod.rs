#![allow(dead_code)]

use conic::{ConeProgram, ConeSolution, ProgramBuilder, SocBlock};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent KKT residuals computed straight from the program data.
#[derive(Debug)]
pub struct Kkt {
    pub primal: f64,
    pub dual: f64,
    pub dual_cone: f64,
    pub complementarity: f64,
    pub gap: f64,
}

pub fn kkt(p: &ConeProgram, sol: &ConeSolution) -> Kkt {
    let z = &sol.z;
    let h_norm = p.lin_rhs.norm_squared() + p.soc.iter().map(|b| b.offset.norm_squared() + b.scalar_offset.powi(2)).sum::<f64>();
    let p_scale = p.eq_rhs.norm().max(h_norm.sqrt()).max(1.0);
    let primal = p.max_violation(z) / p_scale;

    let mut grad = &p.objective + p.eq_matrix.tr_mul(&sol.eq_duals) + p.lin_matrix.tr_mul(&sol.lin_duals);
    let mut dual_cone = sol.lin_duals.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    let mut comp = 0.0_f64;
    for (i, lam) in sol.lin_duals.iter().enumerate() {
        comp = comp.max((lam * sol.lin_slacks[i]).abs());
    }
    for (block, w) in p.soc.iter().zip(&sol.soc_duals) {
        // multiplier of s = (eᵀz + f, Fz + g) ∈ Q enters as −(e w0 + Fᵀ w1)
        let w0 = w[0];
        let w1 = w.rows(1, w.len() - 1).into_owned();
        grad -= &block.scalar_row * w0 + block.rows.tr_mul(&w1);
        dual_cone = dual_cone.max(w1.norm() - w0);
        let s0 = block.scalar_row.dot(z) + block.scalar_offset;
        let s1 = &block.rows * z + &block.offset;
        comp = comp.max((s0 * w0 + s1.dot(&w1)).abs());
    }
    let dual = grad.norm() / p.objective.norm().max(1.0);
    let gap = sol.gap / sol.objective.abs().max(1.0);
    Kkt {
        primal,
        dual,
        dual_cone,
        complementarity: comp,
        gap,
    }
}

/// Random program with a strictly feasible primal point and a strictly
/// feasible dual point, so an optimum exists and strong duality holds.
pub fn random_feasible_socp(seed: u64) -> ConeProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=30);
    let n_eq = rng.random_range(0..=n / 3);
    let n_lin = rng.random_range(n..=2 * n);
    let n_soc = rng.random_range(1..=4);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let x0 = DVector::from_fn(n, |_, _| normal(&mut rng));
    let mut pb = ProgramBuilder::new(n);
    let mut grad = DVector::zeros(n);

    for _ in 0..n_eq {
        let row: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let rhs = DVector::from_vec(row.clone()).dot(&x0);
        let y: f64 = normal(&mut rng);
        grad += DVector::from_vec(row.clone()) * y;
        pb.equality(row, rhs);
    }
    for _ in 0..n_lin {
        let row: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let slack = rng.random_range(0.1..2.0);
        let rhs = DVector::from_vec(row.clone()).dot(&x0) + slack;
        let lam = rng.random_range(0.1..2.0);
        grad += DVector::from_vec(row.clone()) * lam;
        pb.linear(row, rhs);
    }
    for _ in 0..n_soc {
        let k = rng.random_range(1..=6);
        let rows = DMatrix::from_fn(k, n, |_, _| normal(&mut rng));
        let offset = DVector::from_fn(k, |_, _| normal(&mut rng));
        let scalar_row = DVector::from_fn(n, |_, _| normal(&mut rng));
        let margin = rng.random_range(0.1..2.0);
        let scalar_offset = (&rows * &x0 + &offset).norm() - scalar_row.dot(&x0) + margin;
        let w1 = DVector::from_fn(k, |_, _| normal(&mut rng));
        let w0 = w1.norm() + rng.random_range(0.1..2.0);
        grad -= &scalar_row * w0 + rows.tr_mul(&w1);
        pb.soc(SocBlock {
            rows,
            offset,
            scalar_row,
            scalar_offset,
        });
    }
    // c + Aᵀy + G_linᵀλ − Σ(e w0 + Fᵀw1) = 0 at the chosen dual point
    let c = -grad;
    for (i, v) in c.iter().enumerate() {
        pb.set_objective(i, *v);
    }
    pb.build()
}
