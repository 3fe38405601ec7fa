//! Potentials from S-matrix poles by chains of first-order supersymmetric
//! transformations, evaluated in closed form through the Crum–Krein Wronskian
//! `V = l(l+1)/r^2 - 2 (ln W[u_0, ..., u_{n-1}])''`.

mod compact;
mod factorization;
mod potential;
mod wronskian;

pub use compact::{s_wave_compact_potential, CompactForm};
pub use factorization::{classify_poles, u_eval, Classification, FactorizationSolution, Regularity};
pub use potential::{build_potential, tail_decay_fit, Evaluator, PotentialModel, TailFit, R_MIN_EVAL};
pub use wronskian::{wronskian_bundle, wronskian_bundle_fd, wronskian_bundle_normalized, WronskianBundle};
