//! S-matrix pole algebra: the pole polynomial of an effective-range model, its
//! roots, the threshold sum rules and the arctangent phase sum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::erf::ErfModel;
use crate::error::{Error, Result};
use crate::kinematics::PartialWave;
use crate::poly::{self, compensated_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExtractedFromErf,
    DirectFit,
    Manual,
}

/// Absolute tolerance on `|sum_j kappa_j^-alpha|`, in fm^alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SumRuleTolerance(pub f64);

impl SumRuleTolerance {
    /// Pole values printed with four significant digits.
    pub const PUBLISHED: Self = Self(1e-2);
    /// Internally generated pole sets.
    pub const STRICT: Self = Self(1e-8);
}

/// Real pole parameters `kappa_j` (S-matrix poles at `k = i kappa_j`), sorted
/// ascending. The order in which they were supplied is kept in `input_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    l: PartialWave,
    kappas: Vec<f64>,
    provenance: Provenance,
    input_order: Vec<f64>,
}

impl PoleSet {
    pub fn new(l: PartialWave, kappas: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if kappas.is_empty() {
            return Err(Error::DegeneratePole("empty pole set".into()));
        }
        if let Some(k) = kappas.iter().find(|k| !k.is_finite()) {
            return Err(Error::DegeneratePole(format!("non-finite pole {k}")));
        }
        if kappas.contains(&0.0) {
            return Err(Error::DegeneratePole("pole at kappa = 0".into()));
        }
        let input_order = kappas.clone();
        let mut sorted = kappas;
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            l,
            kappas: sorted,
            provenance,
            input_order,
        })
    }

    pub fn l(&self) -> PartialWave {
        self.l
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn input_order(&self) -> &[f64] {
        &self.input_order
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.kappas.iter().filter(|&&k| k > 0.0).count()
    }

    pub fn n_negative(&self) -> usize {
        self.kappas.iter().filter(|&&k| k < 0.0).count()
    }

    /// `delta(k -> inf) = -(pi/2) (n_plus - n_minus)`.
    pub fn high_energy_limit(&self) -> f64 {
        high_energy_limit(&self.kappas)
    }
}

fn high_energy_limit(kappas: &[f64]) -> f64 {
    let np = kappas.iter().filter(|&&k| k > 0.0).count() as f64;
    let nm = kappas.iter().filter(|&&k| k < 0.0).count() as f64;
    -std::f64::consts::FRAC_PI_2 * (np - nm)
}

/// Coefficients (ascending powers of kappa) of
/// `P(-kappa^2) - (-1)^(l+1) kappa^(2l+1) Q(-kappa^2)`.
pub fn pole_polynomial(model: &ErfModel) -> Result<Vec<f64>> {
    let l = model.l.l() as usize;
    let (m, n) = model.orders();
    let degree = (2 * m).max(2 * n + 2 * l + 1);
    let mut c = vec![0.0; degree + 1];
    for (j, &p) in model.numerator().iter().enumerate() {
        c[2 * j] += if j % 2 == 0 { p } else { -p };
    }
    for (j, &q) in model.denominator().iter().enumerate() {
        c[2 * l + 1 + 2 * j] += if (l + j).is_multiple_of(2) { q } else { -q };
    }
    if c[degree] == 0.0 {
        let reduced = poly::degree(&c).unwrap_or(0);
        return Err(Error::DegenerateDegree {
            expected: degree,
            reduced,
        });
    }
    Ok(c)
}

/// Roots are snapped to the real axis when `|Im| < SNAP * (1 + |Re|)`.
const REAL_SNAP: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleExtractionReport {
    pub l: PartialWave,
    /// Pole polynomial, ascending powers of kappa.
    pub polynomial: Vec<f64>,
    /// Every root, as `(re, im)`.
    pub roots: Vec<(f64, f64)>,
    /// Real roots (imaginary-axis S-matrix poles), ascending.
    pub real_poles: Vec<f64>,
    /// Roots off the real kappa axis, as `(re, im)`.
    pub complex_poles: Vec<(f64, f64)>,
    /// `|p(kappa)| / |leading coefficient|` per root, same order as `roots`.
    pub residuals: Vec<f64>,
    /// Sum rules over the real poles (empty for l = 0).
    pub sum_rule_residuals: Vec<f64>,
    /// Complex roots pair up as `kappa, conj(kappa)` (k and -conj(k)).
    pub symmetric: bool,
    pub warnings: Vec<String>,
}

impl PoleExtractionReport {
    pub fn has_complex(&self) -> bool {
        !self.complex_poles.is_empty()
    }

    /// Pole set of the real roots; fails if any root is complex.
    pub fn pole_set(&self) -> Result<PoleSet> {
        if self.has_complex() {
            return Err(Error::UnsupportedPole(format!(
                "{} complex root(s) found; only imaginary-axis poles are supported",
                self.complex_poles.len()
            )));
        }
        PoleSet::new(self.l, self.real_poles.clone(), Provenance::ExtractedFromErf)
    }
}

pub fn extract_poles(model: &ErfModel) -> Result<PoleExtractionReport> {
    let polynomial = pole_polynomial(model)?;
    let lead = *polynomial.last().expect("nonempty polynomial");
    let roots = poly::roots(&polynomial).ok_or_else(|| Error::RootFinder {
        coeffs: polynomial.clone(),
    })?;

    let mut residuals = Vec::with_capacity(roots.len());
    for z in &roots {
        let res = poly::eval_complex(&polynomial, *z).norm() / lead.abs();
        if !(res <= RESIDUAL_TOL) {
            return Err(Error::RootFinder {
                coeffs: polynomial.clone(),
            });
        }
        residuals.push(res);
    }

    let mut real_poles = Vec::new();
    let mut complex: Vec<Complex64> = Vec::new();
    for z in &roots {
        if z.im.abs() < REAL_SNAP * (1.0 + z.re.abs()) {
            real_poles.push(z.re);
        } else {
            complex.push(*z);
        }
    }
    real_poles.sort_by(f64::total_cmp);
    complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let symmetric = conjugate_paired(&complex);
    let mut warnings = Vec::new();
    if !complex.is_empty() {
        warnings.push(format!(
            "{} S-matrix pole(s) off the imaginary k axis; potentials from complex poles are not supported",
            complex.len()
        ));
    }
    if !symmetric {
        warnings.push("complex roots are not paired symmetrically".into());
    }
    if real_poles.contains(&0.0) {
        warnings.push("pole at kappa = 0".into());
    }
    let sum_rule_residuals = if real_poles.iter().all(|&k| k != 0.0) {
        sum_rule_residuals_of(&real_poles, model.l)
    } else {
        Vec::new()
    };

    Ok(PoleExtractionReport {
        l: model.l,
        polynomial,
        roots: roots.iter().map(|z| (z.re, z.im)).collect(),
        real_poles,
        complex_poles: complex.iter().map(|z| (z.re, z.im)).collect(),
        residuals,
        sum_rule_residuals,
        symmetric,
        warnings,
    })
}

fn conjugate_paired(complex: &[Complex64]) -> bool {
    let mut used = vec![false; complex.len()];
    for i in 0..complex.len() {
        if used[i] {
            continue;
        }
        let target = complex[i].conj();
        let partner = (0..complex.len()).find(|&j| {
            j != i && !used[j] && (complex[j] - target).norm() <= 1e-8 * (1.0 + target.norm())
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// `sum_j kappa_j^-alpha` for alpha = 1, 3, ..., 2l-1.
pub fn sum_rule_residuals(poles: &PoleSet) -> Vec<f64> {
    sum_rule_residuals_of(poles.kappas(), poles.l())
}

pub(crate) fn sum_rule_residuals_of(kappas: &[f64], l: PartialWave) -> Vec<f64> {
    (0..l.l())
        .map(|i| {
            let alpha = 2 * i as i32 + 1;
            compensated_sum(kappas.iter().map(|k| k.powi(-alpha)))
        })
        .collect()
}

/// `delta(k) = -sum_j arctan(k / kappa_j)` on a grid.
pub fn delta_from_poles(poles: &PoleSet, k_grid: &[f64]) -> Vec<f64> {
    delta_from_kappas(poles.kappas(), k_grid)
}

pub fn delta_from_kappas(kappas: &[f64], k_grid: &[f64]) -> Vec<f64> {
    k_grid
        .iter()
        .map(|&k| -compensated_sum(kappas.iter().map(|&kap| (k / kap).atan())))
        .collect()
}

/// Derivative of the arctangent sum with respect to each `kappa_j` at `k`.
pub(crate) fn delta_gradient(kappas: &[f64], k: f64) -> impl Iterator<Item = f64> + '_ {
    kappas.iter().map(move |&kap| k / (kap * kap + k * k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRuleCheck {
    pub alpha: u32,
    pub residual: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleValidation {
    pub valid: bool,
    pub has_zero_pole: bool,
    pub sum_rules: Vec<SumRuleCheck>,
    pub n_positive: usize,
    pub n_negative: usize,
    /// `delta(k -> inf)` in radians.
    pub high_energy_limit: f64,
    pub issues: Vec<String>,
}

pub fn validate_pole_set(kappas: &[f64], l: PartialWave, tol: SumRuleTolerance) -> PoleValidation {
    let mut issues = Vec::new();
    let has_zero_pole = kappas.contains(&0.0);
    if has_zero_pole {
        issues.push("pole at kappa = 0".to_string());
    }
    if kappas.is_empty() {
        issues.push("empty pole set".to_string());
    }
    if kappas.iter().any(|k| !k.is_finite()) {
        issues.push("non-finite pole".to_string());
    }
    let sum_rules: Vec<SumRuleCheck> = if has_zero_pole {
        Vec::new()
    } else {
        sum_rule_residuals_of(kappas, l)
            .into_iter()
            .enumerate()
            .map(|(i, residual)| {
                let alpha = 2 * i as u32 + 1;
                let ok = residual.abs() <= tol.0;
                if !ok {
                    issues.push(format!(
                        "sum rule alpha = {alpha} violated: residual {residual:e}"
                    ));
                }
                SumRuleCheck { alpha, residual, ok }
            })
            .collect()
    };
    PoleValidation {
        valid: issues.is_empty(),
        has_zero_pole,
        sum_rules,
        n_positive: kappas.iter().filter(|&&k| k > 0.0).count(),
        n_negative: kappas.iter().filter(|&&k| k < 0.0).count(),
        high_energy_limit: high_energy_limit(kappas),
        issues,
    }
}
