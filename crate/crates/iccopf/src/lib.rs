//! Maximum feasible security levels of chance-constrained DC optimal power
//! flow.
//!
//! A network case ([`mpcase`]) and a scenario become a compact affine model
//! ([`dcgrid`]): generator set-points and participation factors `x`, linear
//! equalities and inequalities, and one Gaussian chance row per generator and
//! branch. Security levels `β_k` enter through `Φ⁻¹(β_k)` ([`gaussmath`]).
//!
//! Along a direction `u ≥ 0` the levels are `β_k = β·u_k + β₀,k`. The slack
//! surrogate ([`surrogate`]) relaxes every chance row by `s_k ≥ 0` and
//! minimises `‖s‖₂`, which is zero exactly while the chance-constrained
//! dispatch is feasible; its derivative `D_β` comes from the row duals.
//! [`inverse`] walks `β` down onto the boundary with a damped Newton
//! iteration on the slack norm and checks the result with the forward
//! problem. [`cli`] wraps all of this in the `iccopf` command.
//!
//! ```no_run
//! use iccopf::{cli, inverse};
//!
//! let loaded = cli::load_scenario("crates/iccopf/data/scenarios/case14.json".as_ref()).unwrap();
//! let text = std::fs::read_to_string("crates/iccopf/data/directions/case14_lines.json").unwrap();
//! let direction: cli::DirectionSpec = serde_json::from_str(&text).unwrap();
//! let profile = direction.profile(&loaded.model).unwrap();
//! let res = inverse::solve_inverse(&loaded.model, &profile, &Default::default()).unwrap();
//! println!("beta_max = {}", res.beta_max);
//! ```

pub mod cli;
pub mod dcgrid;
pub mod gaussmath;
pub mod inverse;
pub mod mpcase;
pub mod surrogate;
