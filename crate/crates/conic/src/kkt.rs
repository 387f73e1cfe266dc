//! Newton systems of the interior-point iteration.
//!
//! Every step solves
//!
//! ```text
//! [ 0   Aᵀ  Gᵀ  ] [dx]   [r1]
//! [ A   0   0   ] [dy] = [r2]
//! [ G   0  -W²  ] [dz]   [r3]
//! ```
//!
//! by eliminating `dz` and factoring the reduced saddle matrix
//! `[GᵀW⁻²G  Aᵀ; A  0]` with a tiny static regularisation, followed by
//! iterative refinement against the unreduced system. Close to the cone
//! boundary the reduced matrix can be too ill-conditioned for refinement to
//! recover full accuracy; the augmented matrix `[0 Aᵀ (W⁻¹G)ᵀ; A 0 0;
//! W⁻¹G 0 −I]` is then factored as well and used instead.

use std::cell::OnceCell;

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::cones::Scaling;

pub(crate) struct KktSystem<'a> {
    a: &'a DMatrix<f64>,
    g: &'a DMatrix<f64>,
    scaling: &'a Scaling,
    /// `W⁻¹ G`
    wg: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    reg: f64,
    augmented: OnceCell<Option<LU<f64, Dyn, Dyn>>>,
    refinement: usize,
}

pub(crate) struct Direction {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl<'a> KktSystem<'a> {
    /// Returns `None` when the reduced matrix is numerically singular.
    pub fn factor(
        a: &'a DMatrix<f64>,
        g: &'a DMatrix<f64>,
        scaling: &'a Scaling,
        refinement: usize,
    ) -> Option<Self> {
        let n = g.ncols();
        let p = a.nrows();
        let wg = scaling.apply_inverse_to_columns(g);
        let h = wg.tr_mul(&wg);
        let scale = h.diagonal().amax().max(1.0);
        let reg = 1e-16 * scale;
        let mut m = DMatrix::zeros(n + p, n + p);
        m.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            m[(i, i)] += reg;
        }
        m.view_mut((n, 0), (p, n)).copy_from(a);
        m.view_mut((0, n), (n, p)).copy_from(&a.transpose());
        for i in 0..p {
            m[(n + i, n + i)] = -reg;
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self {
            a,
            g,
            scaling,
            wg,
            lu,
            reg,
            augmented: OnceCell::new(),
            refinement,
        })
    }

    fn reduced_solve(&self, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> Option<Direction> {
        let n = self.g.ncols();
        let p = self.a.nrows();
        let w_r3 = self.scaling.apply(r3, true);
        let rhs_x = r1 + self.wg.tr_mul(&w_r3);
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&rhs_x);
        rhs.rows_mut(n, p).copy_from(r2);
        let sol = self.lu.solve(&rhs)?;
        let x = sol.rows(0, n).into_owned();
        let y = sol.rows(n, p).into_owned();
        let z = self.scaling.apply(&(&self.wg * &x - w_r3), true);
        Some(Direction { x, y, z })
    }

    fn augmented_solve(&self, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> Option<Direction> {
        let n = self.g.ncols();
        let p = self.a.nrows();
        let m = self.g.nrows();
        let lu = self
            .augmented
            .get_or_init(|| {
                let mut k = DMatrix::zeros(n + p + m, n + p + m);
                for i in 0..n {
                    k[(i, i)] = self.reg;
                }
                k.view_mut((n, 0), (p, n)).copy_from(self.a);
                k.view_mut((0, n), (n, p)).copy_from(&self.a.transpose());
                for i in 0..p {
                    k[(n + i, n + i)] = -self.reg;
                }
                k.view_mut((n + p, 0), (m, n)).copy_from(&self.wg);
                k.view_mut((0, n + p), (n, m)).copy_from(&self.wg.transpose());
                for i in 0..m {
                    k[(n + p + i, n + p + i)] = -1.0;
                }
                let lu = k.lu();
                lu.is_invertible().then_some(lu)
            })
            .as_ref()?;
        let mut rhs = DVector::zeros(n + p + m);
        rhs.rows_mut(0, n).copy_from(r1);
        rhs.rows_mut(n, p).copy_from(r2);
        rhs.rows_mut(n + p, m).copy_from(&self.scaling.apply(r3, true));
        let sol = lu.solve(&rhs)?;
        Some(Direction {
            x: sol.rows(0, n).into_owned(),
            y: sol.rows(n, p).into_owned(),
            z: self.scaling.apply(&sol.rows(n + p, m).into_owned(), true),
        })
    }

    fn residual(&self, d: &Direction, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> [DVector<f64>; 3] {
        let e1 = r1 - (self.a.tr_mul(&d.y) + self.g.tr_mul(&d.z));
        let e2 = r2 - self.a * &d.x;
        let wwz = self.scaling.apply(&self.scaling.apply(&d.z, false), false);
        let e3 = r3 - (self.g * &d.x - wwz);
        [e1, e2, e3]
    }

    fn refine(
        &self,
        mut d: Direction,
        r: [&DVector<f64>; 3],
        inner: impl Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> Option<Direction>,
    ) -> Option<(Direction, f64)> {
        let size = r[0].amax().max(r[1].amax()).max(r[2].amax()).max(1e-300);
        let mut e = self.residual(&d, r[0], r[1], r[2]);
        let mut err = e[0].amax().max(e[1].amax()).max(e[2].amax()) / size;
        for _ in 0..self.refinement {
            if err <= 1e-15 {
                break;
            }
            let c = inner(&e[0], &e[1], &e[2])?;
            let next = Direction {
                x: &d.x + c.x,
                y: &d.y + c.y,
                z: &d.z + c.z,
            };
            let ne = self.residual(&next, r[0], r[1], r[2]);
            let nerr = ne[0].amax().max(ne[1].amax()).max(ne[2].amax()) / size;
            if nerr >= 0.5 * err {
                break;
            }
            d = next;
            e = ne;
            err = nerr;
        }
        Some((d, err))
    }

    pub fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> Option<Direction> {
        let r = [r1, r2, r3];
        let d = self.reduced_solve(r1, r2, r3)?;
        let (d, err) = self.refine(d, r, |a, b, c| self.reduced_solve(a, b, c))?;
        if err <= 1e-12 {
            return Some(d);
        }
        let Some(alt) = self.augmented_solve(r1, r2, r3) else {
            return Some(d);
        };
        match self.refine(alt, r, |a, b, c| self.augmented_solve(a, b, c)) {
            Some((alt, alt_err)) if alt_err < err => Some(alt),
            _ => Some(d),
        }
    }
}
