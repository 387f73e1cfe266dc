//! A single generator with its set-point pinned: the largest feasible security
//! level has a closed form, `Φ((d − p₀)/ν)`, which the Newton iteration recovers.

use iccopf::dcgrid::{ChanceKey, ChanceRow, CompactModel, UncertaintyModel};
use iccopf::gaussmath;
use iccopf::inverse::{self, InverseSettings};
use iccopf::surrogate::SecurityProfile;
use nalgebra::{DMatrix, DVector};

fn main() {
    let (p0, alpha, limit, var) = (10.0, 1.0, 10.3, 0.04);
    // p + α·ω ≤ limit with Var ω = var
    let row = ChanceRow {
        key: ChanceKey::Generator { index: 0, bus: 1 },
        label: "gen:1".into(),
        mean_row: DVector::from_vec(vec![1.0, 0.0]),
        offset: limit,
        noise_matrix: DMatrix::from_row_slice(1, 2, &[0.0, -1.0]),
        noise_offset: DVector::zeros(1),
    };
    let x0 = DVector::from_vec(vec![p0, alpha]);
    let model = CompactModel::pinned(&x0, UncertaintyModel::from_covariance(DMatrix::from_element(1, 1, var)), vec![row]).unwrap();
    let profile = SecurityProfile::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.5), 0.0).unwrap();

    let res = inverse::solve_inverse(&model, &profile, &InverseSettings::default()).unwrap();
    let nu = alpha * var.sqrt();
    let exact = gaussmath::std_normal_cdf((limit - p0) / nu);
    println!("iteration  beta          slack norm    D_beta");
    for r in &res.trace {
        println!("{:>9}  {:.10}  {:.6e}  {:.6}", r.index, r.beta, r.snorm, r.d_beta);
    }
    println!("level at boundary {:.10}, closed form {exact:.10}", res.beta_levels_at_max[0]);
}
