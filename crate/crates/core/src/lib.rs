//! Inversion of partial-wave phase shifts into exactly solvable potentials.
//!
//! The pipeline: fit an effective-range function (Taylor or Padé) to phase
//! shifts, extract the S-matrix poles `k = i kappa_j`, then build the potential
//! from a Wronskian of factorization solutions of the free centrifugal
//! equation. A Numerov forward solver closes the loop by recomputing the phase
//! shifts from the potential.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod erf;
pub mod fitting;
pub mod io;
pub mod error;
pub mod kinematics;
pub mod poles;
pub mod solver;
mod linalg;
mod poly;
pub mod susy;

pub use erf::{
    delta_from_model, effective_range_function, ere_parameters, ere_parameters_with_convention, erf_from_poles,
    erf_from_poles_with_tolerance, s_matrix_from_model, EreParameters, ErfKind, LengthConvention, ErfModel,
    PhaseShiftDataset, PhaseShiftPoint,
};
pub use error::{Error, Result};
pub use kinematics::{elab_from_k, k_from_elab, PartialWave, PhysicalConstants};
pub use poles::{
    delta_from_kappas, delta_from_poles, extract_poles, pole_polynomial, sum_rule_residuals,
    validate_pole_set, PoleExtractionReport, PoleSet, PoleValidation, Provenance,
    SumRuleTolerance,
};
