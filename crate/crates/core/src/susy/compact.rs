//! Closed S-wave forms: a Wronskian of `exp` and `sinh` columns, and the
//! equivalent smaller Wronskian obtained by eliminating the exponentials,
//! `W[e^(c r), f_1, ...] = e^(c r) W[(d/dr - c) f_1, ...]`.

use serde::{Deserialize, Serialize};

use super::potential::{Evaluator, PotentialModel};
use super::wronskian::ColumnFn;
use crate::error::{Error, Result};
use crate::poles::PoleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompactForm {
    /// One column per pole: `e^(kappa r)` for `kappa < 0`, `sinh(kappa r)` for `kappa > 0`.
    Wronskian,
    /// Exponentials eliminated: shifted `sinh`/`cosh` columns of the positive poles only.
    Reduced,
}

pub fn s_wave_compact_potential(poles: &PoleSet, form: CompactForm) -> Result<PotentialModel> {
    if poles.l().l() != 0 {
        return Err(Error::InvalidInput(format!(
            "compact forms exist for l = 0 only, got {}",
            poles.l()
        )));
    }
    let (neg, pos): (Vec<f64>, Vec<f64>) = poles.kappas().iter().partition(|&&k| k < 0.0);
    let (columns, evaluator) = match form {
        CompactForm::Wronskian => (
            neg.iter()
                .map(|&c| ColumnFn::Exp { c })
                .chain(pos.iter().map(|&kappa| ColumnFn::Sinh { kappa, shift: 0.0 }))
                .collect(),
            Evaluator::CompactWronskian,
        ),
        CompactForm::Reduced => (reduced_columns(&neg, &pos)?, Evaluator::CompactReduced),
    };
    PotentialModel::from_parts(poles.clone(), evaluator, columns, 0.0)
}

/// Applies `(d/dr - c)` for every exponential rate `c` to each `sinh(kappa r)`.
///
/// `(d/dr - c) sinh(y)` with `y = kappa r + b` is proportional to
/// `cosh(y - artanh(c/kappa))` when `|c| < kappa` and to
/// `sinh(y - artanh(kappa/c))` when `|c| > kappa`; likewise with sinh and cosh
/// exchanged.
fn reduced_columns(rates: &[f64], kappas: &[f64]) -> Result<Vec<ColumnFn>> {
    if kappas.is_empty() {
        return Err(Error::InvalidInput("reduced form needs at least one positive pole".into()));
    }
    kappas
        .iter()
        .map(|&kappa| {
            let mut is_sinh = true;
            let mut shift = 0.0;
            for &c in rates {
                let ratio = c / kappa;
                if ratio.abs() < 1.0 {
                    shift -= ratio.atanh();
                    is_sinh = !is_sinh;
                } else if ratio.abs() > 1.0 {
                    shift -= (1.0 / ratio).atanh();
                } else {
                    return Err(Error::InadmissibleShift { num: c, den: kappa });
                }
            }
            Ok(if is_sinh {
                ColumnFn::Sinh { kappa, shift }
            } else {
                ColumnFn::Cosh { kappa, shift }
            })
        })
        .collect()
}
