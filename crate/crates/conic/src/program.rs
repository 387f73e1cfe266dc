//! Problem description for small dense conic programs.
//!
//! A [`ConeProgram`] reads
//!
//! ```text
//! minimize    cᵀz
//! subject to  A_eq z = b_eq
//!             G_lin z ≤ h_lin
//!             ‖F_i z + g_i‖₂ ≤ e_iᵀz + f_i      for every second-order-cone block i
//! ```
//!
//! Programs are usually assembled row by row through [`ProgramBuilder`].

use nalgebra::{DMatrix, DVector};

use crate::error::ProgramError;

/// One second-order-cone constraint `‖rows·z + offset‖ ≤ scalar_rowᵀz + scalar_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub rows: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub scalar_row: DVector<f64>,
    pub scalar_offset: f64,
}

impl SocBlock {
    /// Cone dimension, counting the scalar side.
    pub fn cone_dim(&self) -> usize {
        self.rows.nrows() + 1
    }

    /// `scalar side − ‖vector side‖` at `z`; nonnegative iff `z` satisfies the block.
    pub fn margin(&self, z: &DVector<f64>) -> f64 {
        let lhs = (&self.rows * z + &self.offset).norm();
        self.scalar_row.dot(z) + self.scalar_offset - lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub lin_matrix: DMatrix<f64>,
    pub lin_rhs: DVector<f64>,
    pub soc: Vec<SocBlock>,
}

impl ConeProgram {
    /// Number of decision variables.
    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn num_linear(&self) -> usize {
        self.lin_matrix.nrows()
    }

    /// Total cone dimension of the inequality side (linear rows plus every SOC block).
    pub fn cone_dim(&self) -> usize {
        self.num_linear() + self.soc.iter().map(SocBlock::cone_dim).sum::<usize>()
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.dim();
        if n == 0 {
            return Err(ProgramError::Empty);
        }
        check_dims("equality matrix", self.eq_matrix.ncols(), n)?;
        check_dims("equality rhs", self.eq_rhs.len(), self.eq_matrix.nrows())?;
        check_dims("linear matrix", self.lin_matrix.ncols(), n)?;
        check_dims("linear rhs", self.lin_rhs.len(), self.lin_matrix.nrows())?;
        for (i, block) in self.soc.iter().enumerate() {
            if block.rows.ncols() != n || block.scalar_row.len() != n || block.offset.len() != block.rows.nrows() {
                return Err(ProgramError::SocBlock { index: i });
            }
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.eq_matrix.iter().chain(self.eq_rhs.iter()).all(|v| v.is_finite())
            && self.lin_matrix.iter().chain(self.lin_rhs.iter()).all(|v| v.is_finite())
            && self.soc.iter().all(|b| {
                b.scalar_offset.is_finite()
                    && b.rows
                        .iter()
                        .chain(b.offset.iter())
                        .chain(b.scalar_row.iter())
                        .all(|v| v.is_finite())
            });
        if !finite {
            return Err(ProgramError::NonFinite);
        }
        Ok(())
    }

    /// Largest violation of any constraint at `z` (0 when `z` is feasible).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        let eq = (&self.eq_matrix * z - &self.eq_rhs).amax();
        let lin = (&self.lin_matrix * z - &self.lin_rhs)
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v));
        let soc = self.soc.iter().fold(0.0_f64, |acc, b| acc.max(-b.margin(z)));
        eq.max(lin).max(soc)
    }
}

fn check_dims(what: &'static str, got: usize, expected: usize) -> Result<(), ProgramError> {
    if got == expected {
        Ok(())
    } else {
        Err(ProgramError::Dimension { what, expected, got })
    }
}

/// Row-by-row assembly of a [`ConeProgram`].
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    n: usize,
    objective: Vec<f64>,
    eq_rows: Vec<(Vec<f64>, f64)>,
    lin_rows: Vec<(Vec<f64>, f64)>,
    soc: Vec<SocBlock>,
}

impl ProgramBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            objective: vec![0.0; n],
            eq_rows: Vec::new(),
            lin_rows: Vec::new(),
            soc: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set_objective(&mut self, index: usize, value: f64) -> &mut Self {
        self.objective[index] = value;
        self
    }

    /// Adds `rowᵀz = rhs`; returns the equality index.
    pub fn equality(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        assert_eq!(row.len(), self.n, "equality row length");
        self.eq_rows.push((row, rhs));
        self.eq_rows.len() - 1
    }

    /// Adds `rowᵀz ≤ rhs`; returns the linear-row index, which is also the index
    /// of its multiplier in [`crate::ConeSolution::lin_duals`].
    pub fn linear(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        assert_eq!(row.len(), self.n, "linear row length");
        self.lin_rows.push((row, rhs));
        self.lin_rows.len() - 1
    }

    /// Adds a second-order-cone block; returns its index.
    pub fn soc(&mut self, block: SocBlock) -> usize {
        assert_eq!(block.rows.ncols(), self.n, "soc block width");
        self.soc.push(block);
        self.soc.len() - 1
    }

    pub fn num_linear(&self) -> usize {
        self.lin_rows.len()
    }

    pub fn build(self) -> ConeProgram {
        let n = self.n;
        let stack = |rows: &[(Vec<f64>, f64)]| {
            let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
            let r = DVector::from_iterator(rows.len(), rows.iter().map(|(_, b)| *b));
            (m, r)
        };
        let (eq_matrix, eq_rhs) = stack(&self.eq_rows);
        let (lin_matrix, lin_rhs) = stack(&self.lin_rows);
        ConeProgram {
            objective: DVector::from_vec(self.objective),
            eq_matrix,
            eq_rhs,
            lin_matrix,
            lin_rhs,
            soc: self.soc,
        }
    }
}
