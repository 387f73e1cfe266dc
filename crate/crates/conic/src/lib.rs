//! Small dense second-order cone programming.
//!
//! The solver targets desk-scale problems (a few hundred variables) where
//! accurate multipliers matter more than raw throughput: every optimal
//! solution comes with equality, linear-row and cone multipliers, and
//! infeasible programs come with a Farkas certificate.
//!
//! ```
//! use conic::{ProgramBuilder, SocBlock, Status};
//! use nalgebra::{DMatrix, DVector};
//!
//! // minimize t  s.t.  ‖(3, 4)‖ ≤ t
//! let mut pb = ProgramBuilder::new(1);
//! pb.set_objective(0, 1.0);
//! pb.soc(SocBlock {
//!     rows: DMatrix::zeros(2, 1),
//!     offset: DVector::from_vec(vec![3.0, 4.0]),
//!     scalar_row: DVector::from_vec(vec![1.0]),
//!     scalar_offset: 0.0,
//! });
//! let sol = conic::solve(&pb.build(), 1e-8).unwrap();
//! assert_eq!(sol.status, Status::Optimal);
//! assert!((sol.z[0] - 5.0).abs() < 1e-7);
//! ```

mod cones;
mod error;
mod kkt;
mod program;
mod solver;

pub use error::ProgramError;
pub use program::{ConeProgram, ProgramBuilder, SocBlock};
pub use solver::{solve, solve_with, ConeSolution, Settings, Status};
