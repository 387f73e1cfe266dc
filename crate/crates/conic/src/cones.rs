//! Cone algebra: Jordan products, Nesterov-Todd scalings and step lengths for
//! the nonnegative orthant and second-order cones.
//!
//! Vectors live in the concatenated cone space; each [`Block`] owns a
//! contiguous range. For a second-order cone block the first entry is the
//! scalar side and the rest the vector side.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    Nonneg { start: usize, len: usize },
    Soc { start: usize, len: usize },
}

impl Block {
    /// Contribution to the cone degree.
    pub fn degree(&self) -> usize {
        match *self {
            Block::Nonneg { len, .. } => len,
            Block::Soc { .. } => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cones {
    pub blocks: Vec<Block>,
    pub dim: usize,
    pub degree: usize,
}

impl Cones {
    pub fn new(num_linear: usize, soc_dims: impl IntoIterator<Item = usize>) -> Self {
        let mut blocks = Vec::new();
        let mut start = 0;
        if num_linear > 0 {
            blocks.push(Block::Nonneg { start, len: num_linear });
            start += num_linear;
        }
        for len in soc_dims {
            blocks.push(Block::Soc { start, len });
            start += len;
        }
        let degree = blocks.iter().map(Block::degree).sum();
        Self { blocks, dim: start, degree }
    }

    /// Identity element `e`.
    pub fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim);
        for b in &self.blocks {
            match *b {
                Block::Nonneg { start, len } => e.rows_mut(start, len).fill(1.0),
                Block::Soc { start, .. } => e[start] = 1.0,
            }
        }
        e
    }

    /// Smallest `t` with `v + t·e` in the closed cone.
    pub fn min_shift(&self, v: &DVector<f64>) -> f64 {
        let mut t = f64::NEG_INFINITY;
        for b in &self.blocks {
            match *b {
                Block::Nonneg { start, len } => {
                    for i in start..start + len {
                        t = t.max(-v[i]);
                    }
                }
                Block::Soc { start, len } => {
                    let tail = v.rows(start + 1, len - 1).norm();
                    t = t.max(tail - v[start]);
                }
            }
        }
        t
    }

    /// Jordan product `u ∘ v`.
    pub fn product(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for b in &self.blocks {
            match *b {
                Block::Nonneg { start, len } => {
                    for i in start..start + len {
                        out[i] = u[i] * v[i];
                    }
                }
                Block::Soc { start, len } => {
                    let uu = u.rows(start, len);
                    let vv = v.rows(start, len);
                    out[start] = uu.dot(&vv);
                    for i in 1..len {
                        out[start + i] = uu[0] * vv[i] + vv[0] * uu[i];
                    }
                }
            }
        }
        out
    }

    /// Solves `lambda ∘ x = w` for `x`.
    pub fn inverse_product(&self, lambda: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for b in &self.blocks {
            match *b {
                Block::Nonneg { start, len } => {
                    for i in start..start + len {
                        out[i] = w[i] / lambda[i];
                    }
                }
                Block::Soc { start, len } => {
                    let l0 = lambda[start];
                    let l1 = lambda.rows(start + 1, len - 1);
                    let w1 = w.rows(start + 1, len - 1);
                    let det = l0 * l0 - l1.norm_squared();
                    let x0 = (l0 * w[start] - l1.dot(&w1)) / det;
                    out[start] = x0;
                    for i in 1..len {
                        out[start + i] = (w[start + i] - lambda[start + i] * x0) / l0;
                    }
                }
            }
        }
        out
    }

    /// Largest `alpha` such that `x + alpha·d` stays in the cone (infinity when unbounded).
    pub fn max_step(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for b in &self.blocks {
            match *b {
                Block::Nonneg { start, len } => {
                    for i in start..start + len {
                        if d[i] < 0.0 {
                            alpha = alpha.min(-x[i] / d[i]);
                        }
                    }
                }
                Block::Soc { start, len } => {
                    alpha = alpha.min(soc_max_step(
                        x.rows(start, len).as_slice(),
                        d.rows(start, len).as_slice(),
                    ));
                }
            }
        }
        alpha
    }
}

fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    // (x0 + a d0)^2 - |x1 + a d1|^2 = qa a^2 + 2 qb a + qc
    let qa = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
    let qb = x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum::<f64>();
    let qc = (x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()).max(0.0);

    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = -x[0] / d[0];
    }
    let root = if qa.abs() <= f64::EPSILON * (qb.abs() + qc.abs()).max(f64::MIN_POSITIVE) {
        if qb < 0.0 {
            -qc / (2.0 * qb)
        } else {
            f64::INFINITY
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            let q = -(qb + qb.signum() * sq);
            let mut best = f64::INFINITY;
            for r in [q / qa, if q != 0.0 { qc / q } else { f64::INFINITY }] {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
            best
        }
    };
    alpha.min(root)
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`. Every block is symmetric.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    parts: Vec<Part>,
    dim: usize,
}

#[derive(Debug, Clone)]
enum Part {
    Nonneg { start: usize, w: Vec<f64> },
    Soc { start: usize, eta: f64, w: DVector<f64> },
}

impl Scaling {
    pub fn identity(cones: &Cones) -> Self {
        let parts = cones
            .blocks
            .iter()
            .map(|b| match *b {
                Block::Nonneg { start, len } => Part::Nonneg { start, w: vec![1.0; len] },
                Block::Soc { start, len } => {
                    let mut w = DVector::zeros(len);
                    w[0] = 1.0;
                    Part::Soc { start, eta: 1.0, w }
                }
            })
            .collect();
        Self { parts, dim: cones.dim }
    }

    /// Computes the scaling point for strictly interior `s` and `z`.
    pub fn nesterov_todd(cones: &Cones, s: &DVector<f64>, z: &DVector<f64>) -> Self {
        let parts = cones
            .blocks
            .iter()
            .map(|b| match *b {
                Block::Nonneg { start, len } => Part::Nonneg {
                    start,
                    w: (start..start + len).map(|i| (s[i] / z[i]).sqrt()).collect(),
                },
                Block::Soc { start, len } => {
                    let ss = s.rows(start, len);
                    let zz = z.rows(start, len);
                    let s_det = jnorm_sq(ss.as_slice()).max(f64::MIN_POSITIVE).sqrt();
                    let z_det = jnorm_sq(zz.as_slice()).max(f64::MIN_POSITIVE).sqrt();
                    let sb = ss / s_det;
                    let zb = zz / z_det;
                    let gamma = ((1.0 + sb.dot(&zb)) / 2.0).sqrt();
                    let mut w = DVector::zeros(len);
                    w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                    for i in 1..len {
                        w[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                    }
                    // renormalise so that w lies exactly on the unit hyperboloid
                    let tail = w.rows(1, len - 1).norm_squared();
                    w[0] = (1.0 + tail).sqrt();
                    Part::Soc {
                        start,
                        eta: (s_det / z_det).sqrt(),
                        w,
                    }
                }
            })
            .collect();
        Self { parts, dim: cones.dim }
    }

    /// `W v` (or `W⁻¹ v` when `inverse`).
    pub fn apply(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for part in &self.parts {
            match part {
                Part::Nonneg { start, w } => {
                    for (i, wi) in w.iter().enumerate() {
                        out[start + i] = if inverse { v[start + i] / wi } else { v[start + i] * wi };
                    }
                }
                Part::Soc { start, eta, w } => {
                    let len = w.len();
                    let vv = v.rows(*start, len);
                    let r = soc_apply(w, vv.as_slice(), inverse);
                    let scale = if inverse { 1.0 / eta } else { *eta };
                    for i in 0..len {
                        out[start + i] = scale * r[i];
                    }
                }
            }
        }
        out
    }

    /// `W⁻¹ M` applied column by column.
    pub fn apply_inverse_to_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for part in &self.parts {
            match part {
                Part::Nonneg { start, w } => {
                    for (i, wi) in w.iter().enumerate() {
                        out.row_mut(start + i).scale_mut(1.0 / wi);
                    }
                }
                Part::Soc { start, eta, w } => {
                    let len = w.len();
                    for j in 0..m.ncols() {
                        let col: Vec<f64> = (0..len).map(|i| m[(start + i, j)]).collect();
                        if col.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let r = soc_apply(w, &col, true);
                        for i in 0..len {
                            out[(start + i, j)] = r[i] / eta;
                        }
                    }
                }
            }
        }
        out
    }
}

/// `x0² − ‖x1‖²`
fn jnorm_sq(x: &[f64]) -> f64 {
    x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Applies the unit-determinant block `[w0, w1ᵀ; w1, I + w1w1ᵀ/(1+w0)]` or its
/// inverse `J·(·)·J` to `v`.
fn soc_apply(w: &DVector<f64>, v: &[f64], inverse: bool) -> Vec<f64> {
    let len = w.len();
    let sign = if inverse { -1.0 } else { 1.0 };
    let w1v1: f64 = (1..len).map(|i| w[i] * v[i]).sum();
    let mut out = vec![0.0; len];
    out[0] = w[0] * v[0] + sign * w1v1;
    let coef = sign * v[0] + w1v1 / (1.0 + w[0]);
    for i in 1..len {
        out[i] = v[i] + coef * w[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cones() -> Cones {
        Cones::new(2, [3, 4])
    }

    fn interior(seed: f64) -> DVector<f64> {
        DVector::from_vec(vec![
            1.0 + seed,
            0.5,
            2.0,
            0.3 * seed,
            -0.4,
            3.0,
            0.2,
            -1.1,
            0.7 * seed,
        ])
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let c = cones();
        let s = interior(0.3);
        let z = interior(1.7);
        let w = Scaling::nesterov_todd(&c, &s, &z);
        let lz = w.apply(&z, false);
        let ls = w.apply(&s, true);
        assert!((lz - ls).amax() < 1e-12);
    }

    #[test]
    fn scaling_inverse_round_trip() {
        let c = cones();
        let w = Scaling::nesterov_todd(&c, &interior(0.1), &interior(2.0));
        let v = DVector::from_fn(9, |i, _| (i as f64).sin());
        let back = w.apply(&w.apply(&v, false), true);
        assert!((back - v).amax() < 1e-12);
    }

    #[test]
    fn inverse_product_solves_jordan_equation() {
        let c = cones();
        let l = interior(0.5);
        let w = DVector::from_fn(9, |i, _| (i as f64 * 0.7).cos());
        let x = c.inverse_product(&l, &w);
        assert!((c.product(&l, &x) - w).amax() < 1e-12);
    }

    #[test]
    fn max_step_lands_on_boundary() {
        let c = Cones::new(0, [3]);
        let x = DVector::from_vec(vec![2.0, 0.5, 0.5]);
        let d = DVector::from_vec(vec![-1.0, 0.3, 0.0]);
        let a = c.max_step(&x, &d);
        let y = &x + &d * a;
        assert!((y[0] - y.rows(1, 2).norm()).abs() < 1e-12);
        assert_eq!(c.max_step(&x, &DVector::from_vec(vec![1.0, 0.0, 0.0])), f64::INFINITY);
    }

    #[test]
    fn min_shift_enters_cone() {
        let c = cones();
        let v = DVector::from_vec(vec![-1.0, 2.0, 0.0, 3.0, 0.0, 1.0, 5.0, 0.0, 0.0]);
        let t = c.min_shift(&v);
        assert_eq!(t, 4.0);
    }
}
