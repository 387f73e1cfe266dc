//! Seeded forecast-error covariance and its square root.

use iccopf::dcgrid;

fn main() {
    let u = dcgrid::sample_sigma(1, 4, 0.1).unwrap();
    println!("Σ (per unit²):\n{:.4}", u.sigma);
    let back = &u.sigma_sqrt * u.sigma_sqrt.transpose();
    println!("‖Σ½Σ½ᵀ − Σ‖∞ = {:.2e}", (back - &u.sigma).amax());
    let eig = u.sigma.clone().symmetric_eigen().eigenvalues;
    println!("eigenvalues: {:.4}", eig.transpose());
}
