//! A robust linear program: maximise return over a box under an ellipsoidal
//! uncertainty budget, then read off the multipliers.

use conic::{ProgramBuilder, SocBlock, Status};
use nalgebra::{DMatrix, DVector};

fn main() {
    let mean = [0.08, 0.12, 0.10];
    // square root of the return covariance
    let root = DMatrix::from_row_slice(3, 3, &[0.10, 0.00, 0.00, 0.02, 0.20, 0.00, 0.01, 0.03, 0.15]);
    let risk_budget = 0.09;

    // variables: weights w (3)
    let mut pb = ProgramBuilder::new(3);
    for (i, m) in mean.iter().enumerate() {
        pb.set_objective(i, -m);
    }
    pb.equality(vec![1.0, 1.0, 1.0], 1.0);
    for i in 0..3 {
        let mut row = vec![0.0; 3];
        row[i] = -1.0;
        pb.linear(row, 0.0);
    }
    pb.soc(SocBlock {
        rows: root.transpose(),
        offset: DVector::zeros(3),
        scalar_row: DVector::zeros(3),
        scalar_offset: risk_budget,
    });

    let sol = conic::solve(&pb.build(), 1e-9).expect("well-formed program");
    assert_eq!(sol.status, Status::Optimal);
    println!("weights        {:.6?}", sol.z.as_slice());
    println!("expected return {:.6}", -sol.objective);
    println!("budget price    {:.6}", sol.soc_duals[0][0]);
    println!("iterations      {}", sol.iterations);
}
