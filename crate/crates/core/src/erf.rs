//! Effective-range-function models and conversions between K(k^2), the phase
//! shift and the S matrix.
//!
//! `K(k^2) = k^(2l+1) cot(delta)`, represented either as a Taylor polynomial in
//! `k^2` or as a ratio `P(k^2) / Q(k^2)` with `Q(0) = 1`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{k_from_elab, PartialWave, PhysicalConstants};
use crate::poles::{sum_rule_residuals_of, PoleSet, SumRuleTolerance};
use crate::poly::{self, elementary_symmetric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftPoint {
    /// Laboratory energy (MeV).
    pub e_lab: f64,
    /// Phase shift (radians), continuous branch.
    pub delta: f64,
    /// One-sigma uncertainty on `delta` (radians).
    pub sigma: Option<f64>,
}

/// Measured phase shifts of one partial wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftDataset {
    pub l: PartialWave,
    points: Vec<PhaseShiftPoint>,
}

impl PhaseShiftDataset {
    pub fn new(l: PartialWave, points: Vec<PhaseShiftPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("dataset has no points".into()));
        }
        let mut prev_e = 0.0;
        let mut prev_delta = 0.0;
        for (i, p) in points.iter().enumerate() {
            if !(p.e_lab.is_finite() && p.delta.is_finite()) {
                return Err(Error::InvalidInput(format!("point {i} is not finite")));
            }
            if p.e_lab <= prev_e {
                return Err(Error::InvalidInput(format!(
                    "energies must be positive and strictly increasing (point {i}, E = {} MeV)",
                    p.e_lab
                )));
            }
            if let Some(s) = p.sigma {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "uncertainty of point {i} must be positive"
                    )));
                }
            }
            if (p.delta - prev_delta).abs() >= FRAC_PI_2 {
                return Err(Error::InvalidInput(format!(
                    "phase shift jumps by more than 90 degrees at point {i}; \
                     data must be on a continuous branch starting near zero"
                )));
            }
            prev_e = p.e_lab;
            prev_delta = p.delta;
        }
        Ok(Self { l, points })
    }

    pub fn points(&self) -> &[PhaseShiftPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn wave_numbers(&self, c: &PhysicalConstants) -> Result<Vec<f64>> {
        self.points.iter().map(|p| k_from_elab(p.e_lab, c)).collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn has_sigmas(&self) -> bool {
        self.points.iter().all(|p| p.sigma.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErfKind {
    Taylor,
    Pade,
}

/// `K(k^2) = P(k^2) / Q(k^2)`, coefficients in ascending powers of `k^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErfModel {
    pub l: PartialWave,
    pub kind: ErfKind,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
}

impl ErfModel {
    pub fn taylor(l: PartialWave, numerator: Vec<f64>) -> Result<Self> {
        Self::build(l, ErfKind::Taylor, numerator, vec![1.0])
    }

    /// Rational model. `denominator[0]` must be 1.
    pub fn pade(l: PartialWave, numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        Self::build(l, ErfKind::Pade, numerator, denominator)
    }

    /// Taylor model `-1/a + (r/2) k^2 - P r^3 k^4`.
    pub fn from_ere(l: PartialWave, ere: &EreParameters) -> Result<Self> {
        Self::from_ere_with_convention(l, ere, LengthConvention::Standard)
    }

    pub fn from_ere_with_convention(
        l: PartialWave,
        ere: &EreParameters,
        convention: LengthConvention,
    ) -> Result<Self> {
        if ere.a == 0.0 || !ere.a.is_finite() {
            return Err(Error::InvalidModel("scattering length must be finite and nonzero".into()));
        }
        let r3 = ere.r * ere.r * ere.r;
        let p0 = convention.sign() / ere.a;
        Self::taylor(l, vec![p0, ere.r / 2.0, -ere.shape * r3])
    }

    fn build(
        l: PartialWave,
        kind: ErfKind,
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    ) -> Result<Self> {
        if numerator.is_empty() {
            return Err(Error::InvalidModel("numerator has no coefficients".into()));
        }
        if denominator.first() != Some(&1.0) {
            return Err(Error::InvalidModel("denominator must start with q0 = 1".into()));
        }
        if kind == ErfKind::Taylor && denominator.len() != 1 {
            return Err(Error::InvalidModel("Taylor model must have N = 0".into()));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        Ok(Self {
            l,
            kind,
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// Orders `(M, N)`.
    pub fn orders(&self) -> (usize, usize) {
        (self.numerator.len() - 1, self.denominator.len() - 1)
    }

    /// Whether the model has the `delta ~ 1/k` high-energy behaviour (M - N = l + 1).
    pub fn has_correct_high_energy_limit(&self) -> bool {
        let (m, n) = self.orders();
        m as i64 - n as i64 == self.l.l() as i64 + 1
    }

    /// `(P(x), Q(x))` at `x = k^2`.
    pub fn eval_parts(&self, k2: f64) -> (f64, f64) {
        (
            poly::eval_real(&self.numerator, k2),
            poly::eval_real(&self.denominator, k2),
        )
    }

    pub fn eval(&self, k2: f64) -> f64 {
        let (p, q) = self.eval_parts(k2);
        p / q
    }

    /// Principal phase in (-pi/2, pi/2] with `cot(delta) = K / k^(2l+1)`.
    fn principal_delta(&self, k: f64) -> Result<f64> {
        let (p, q) = self.eval_parts(k * k);
        let y = k.powi(self.l.k_power()) * q;
        if !(p.is_finite() && y.is_finite()) || (p == 0.0 && y == 0.0) {
            return Err(Error::NonFinite { k });
        }
        let mut theta = y.atan2(p);
        if theta > FRAC_PI_2 {
            theta -= PI;
        } else if theta <= -FRAC_PI_2 {
            theta += PI;
        }
        Ok(theta)
    }
}

/// Sign attached to the scattering length in the constant term of K.
///
/// `Standard` is `K(0) = -1/a`. Tabulations for higher partial waves often
/// quote `a` with the opposite sign, `K(0) = +1/a`; that reading is `Flipped`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthConvention {
    #[default]
    Standard,
    Flipped,
}

impl LengthConvention {
    fn sign(self) -> f64 {
        match self {
            Self::Standard => -1.0,
            Self::Flipped => 1.0,
        }
    }
}

/// Scattering length, effective range and shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EreParameters {
    pub a: f64,
    pub r: f64,
    pub shape: f64,
    /// False when `r = 0` and the shape parameter is 0/0; `shape` is then 0.
    pub shape_defined: bool,
}

/// `k^(2l+1) cot(delta)` for one measured point.
pub fn effective_range_function(k: f64, delta: f64, l: PartialWave) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wave number must be > 0, got {k}")));
    }
    let turns = delta / PI;
    if (turns - turns.round()).abs() < 1e-14 {
        return Err(Error::KPole { k });
    }
    Ok(k.powi(l.k_power()) / delta.tan())
}

/// Phase shifts of a model on a grid, on the continuous branch with
/// `delta(0) = 0`.
///
/// Adjacent samples are joined on the nearest branch; intervals where the
/// phase moves by more than pi/4 are bisected until the branch is unambiguous.
pub fn delta_from_model(model: &ErfModel, k_grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(k_grid.len());
    let mut k_prev = 0.0;
    let mut d_prev = 0.0;
    for &k in k_grid {
        if !(k > k_prev) || !k.is_finite() {
            return Err(Error::Domain(format!(
                "k grid must be positive and strictly increasing (k = {k})"
            )));
        }
        let d = unwrap_step(model, k_prev, d_prev, k, 0)?;
        out.push(d);
        k_prev = k;
        d_prev = d;
    }
    Ok(out)
}

const UNWRAP_MAX_DEPTH: u32 = 48;

fn unwrap_step(model: &ErfModel, k0: f64, d0: f64, k1: f64, depth: u32) -> Result<f64> {
    let theta = model.principal_delta(k1)?;
    let d1 = theta + PI * ((d0 - theta) / PI).round();
    if (d1 - d0).abs() <= FRAC_PI_4 {
        return Ok(d1);
    }
    if depth >= UNWRAP_MAX_DEPTH {
        return Err(Error::UnwrapAmbiguity { k0, k1 });
    }
    let mid = 0.5 * (k0 + k1);
    let d_mid = unwrap_step(model, k0, d0, mid, depth + 1)?;
    unwrap_step(model, mid, d_mid, k1, depth + 1)
}

/// `S(k) = (K + i k^(2l+1)) / (K - i k^(2l+1))`, evaluated as
/// `(P + i k^(2l+1) Q) / (P - i k^(2l+1) Q)` so that poles of K are harmless.
pub fn s_matrix_from_model(model: &ErfModel, k: f64) -> Result<Complex64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wave number must be > 0, got {k}")));
    }
    let (p, q) = model.eval_parts(k * k);
    let y = k.powi(model.l.k_power()) * q;
    let num = Complex64::new(p, y);
    let den = Complex64::new(p, -y);
    if den.norm() == 0.0 {
        return Err(Error::RealAxisPole { k });
    }
    let s = num / den;
    if !s.is_finite() {
        return Err(Error::NonFinite { k });
    }
    Ok(s)
}

pub fn ere_parameters(model: &ErfModel) -> Result<EreParameters> {
    ere_parameters_with_convention(model, LengthConvention::Standard)
}

pub fn ere_parameters_with_convention(
    model: &ErfModel,
    convention: LengthConvention,
) -> Result<EreParameters> {
    if model.kind != ErfKind::Taylor {
        return Err(Error::InvalidModel(
            "effective-range parameters need a Taylor model".into(),
        ));
    }
    let p = model.numerator();
    if p.len() < 3 {
        return Err(Error::InsufficientOrder(p.len() - 1));
    }
    if p[0] == 0.0 {
        return Err(Error::InfiniteScatteringLength);
    }
    let a = convention.sign() / p[0];
    let r = 2.0 * p[1];
    let (shape, shape_defined) = if r == 0.0 {
        (0.0, false)
    } else {
        (-p[2] / (r * r * r), true)
    };
    Ok(EreParameters {
        a,
        r,
        shape,
        shape_defined,
    })
}

/// Exact rational effective-range function of the S matrix
/// `prod_j (kappa_j - ik) / (kappa_j + ik)`, with strict sum-rule tolerance.
pub fn erf_from_poles(poles: &PoleSet) -> Result<ErfModel> {
    erf_from_poles_with_tolerance(poles, SumRuleTolerance::STRICT)
}

/// As [`erf_from_poles`] with an explicit sum-rule tolerance. Within tolerance,
/// the low-order terms that the sum rules force to zero are dropped.
pub fn erf_from_poles_with_tolerance(poles: &PoleSet, tol: SumRuleTolerance) -> Result<ErfModel> {
    let l = poles.l();
    let kappas = poles.kappas();
    let n = kappas.len();
    let lv = l.l() as usize;
    if n == 0 {
        return Err(Error::DegeneratePole("empty pole set".into()));
    }
    if kappas.contains(&0.0) {
        return Err(Error::DegeneratePole("pole at kappa = 0".into()));
    }
    for (i, res) in sum_rule_residuals_of(kappas, l).into_iter().enumerate() {
        if res.abs() > tol.0 {
            return Err(Error::SumRuleViolation {
                alpha: 2 * i as u32 + 1,
                residual: res,
            });
        }
    }

    // With A = prod (kappa - ik), B = prod (kappa + ik):
    //   A + B = 2 sum_j (-1)^j e_{n-2j} k^{2j}
    //   A - B = -2i k sum_j (-1)^j e_{n-2j-1} k^{2j}
    // so K = i k^{2l+1} (A + B) / (A - B) = -k^{2l} E(k^2) / O(k^2).
    let e = elementary_symmetric(kappas);
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let even: Vec<f64> = (0..=n / 2).map(|j| sign(j) * e[n - 2 * j]).collect();
    let odd: Vec<f64> = (0..n.div_ceil(2)).map(|j| sign(j) * e[n - 2 * j - 1]).collect();
    if odd.iter().all(|&c| c == 0.0) {
        return Err(Error::DegeneratePole(
            "S matrix is identically 1 (poles cancel pairwise)".into(),
        ));
    }
    if odd.len() <= lv {
        return Err(Error::DegeneratePole(format!(
            "{n} poles cannot produce a finite effective-range function for {l}"
        )));
    }
    let lead = odd[lv];
    if lead == 0.0 {
        return Err(Error::DegeneratePole(
            "effective-range function diverges at threshold".into(),
        ));
    }
    let numerator: Vec<f64> = even.iter().map(|c| -c / lead).collect();
    let mut denominator: Vec<f64> = odd[lv..].iter().map(|c| c / lead).collect();
    denominator[0] = 1.0;
    ErfModel::pade(l, numerator, denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::{delta_from_kappas, Provenance};
    use approx::assert_relative_eq;

    const S: PartialWave = PartialWave(0);
    const D: PartialWave = PartialWave(2);

    fn single_pole_model(kappa: f64) -> ErfModel {
        ErfModel::taylor(S, vec![-kappa]).unwrap()
    }

    #[test]
    fn erf_value_examples() {
        assert_relative_eq!(effective_range_function(1.0, FRAC_PI_4, S).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(effective_range_function(2.0, FRAC_PI_4, D).unwrap(), 32.0, epsilon = 1e-12);
        let d = -(0.3_f64 / 0.5).atan();
        assert_relative_eq!(effective_range_function(0.3, d, S).unwrap(), -0.5, epsilon = 1e-14);
    }

    #[test]
    fn erf_value_errors() {
        assert!(matches!(effective_range_function(1.0, 0.0, S), Err(Error::KPole { .. })));
        assert!(matches!(effective_range_function(1.0, PI, S), Err(Error::KPole { .. })));
        assert!(matches!(effective_range_function(0.0, 0.3, S), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_model_is_single_arctangent() {
        let model = single_pole_model(0.5);
        let grid: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
        let d = delta_from_model(&model, &grid).unwrap();
        for (k, di) in grid.iter().zip(d) {
            assert!((di + (k / 0.5).atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn unwrap_through_k_pole() {
        // K = (1 - k^2) / (1 - 2 k^2) has a pole at k^2 = 1/2 and a zero at 1.
        let model = ErfModel::pade(S, vec![1.0, -1.0], vec![1.0, -2.0]).unwrap();
        let grid: Vec<f64> = (1..=300).map(|i| 0.01 * i as f64).collect();
        let d = delta_from_model(&model, &grid).unwrap();
        for w in d.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.1);
        }
        // cot(delta) = K / k stays consistent with the model
        for (k, di) in grid.iter().zip(&d) {
            let (p, q) = model.eval_parts(k * k);
            let lhs = di.sin() * p;
            let rhs = di.cos() * k * q;
            assert!((lhs - rhs).abs() < 1e-10 * (p.abs() + (k * q).abs()));
        }
    }

    #[test]
    fn coarse_grid_is_refined() {
        let model = single_pole_model(-0.04);
        // One point far from threshold: the branch is tracked from k = 0.
        let d = delta_from_model(&model, &[2.0]).unwrap();
        assert!((d[0] - (2.0_f64 / 0.04).atan()).abs() < 1e-12);
    }

    #[test]
    fn s_matrix_examples() {
        let zero = ErfModel::taylor(S, vec![0.0]).unwrap();
        let s = s_matrix_from_model(&zero, 0.7).unwrap();
        assert_relative_eq!(s.re, -1.0, epsilon = 1e-15);
        assert!(s.im.abs() < 1e-15);

        let s = s_matrix_from_model(&single_pole_model(0.5), 0.5).unwrap();
        assert!(s.re.abs() < 1e-15);
        assert_relative_eq!(s.im, -1.0, epsilon = 1e-15);
        // e^{2 i delta} with delta = -pi/4
        assert!((s.arg() + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn ere_examples() {
        let m = ErfModel::taylor(S, vec![0.04219, 1.30386, 0.06883]).unwrap();
        let e = ere_parameters(&m).unwrap();
        assert!((e.a + 23.70).abs() < 0.01);
        assert!((e.r - 2.608).abs() < 0.001);

        let ere = EreParameters { a: 0.88762, r: 15.33061, shape: -0.00246, shape_defined: true };
        let m = ErfModel::from_ere(D, &ere).unwrap();
        let p = m.numerator();
        assert!((p[0] + 1.12660).abs() < 1e-5);
        assert!((p[1] - 7.665305).abs() < 1e-9);
        // 0.00246 * 15.33061^3
        assert!((p[2] - 8.8637).abs() < 1e-3);
        let back = ere_parameters(&m).unwrap();
        assert_relative_eq!(back.a, ere.a, max_relative = 1e-15);
        assert_relative_eq!(back.r, ere.r, max_relative = 1e-15);
        assert_relative_eq!(back.shape, ere.shape, max_relative = 1e-14);

        let degenerate = ErfModel::taylor(S, vec![-1.0, 0.0, 0.0]).unwrap();
        let e = ere_parameters(&degenerate).unwrap();
        assert_eq!((e.a, e.r, e.shape, e.shape_defined), (1.0, 0.0, 0.0, false));
    }

    #[test]
    fn ere_errors() {
        let m = ErfModel::taylor(S, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(ere_parameters(&m), Err(Error::InfiniteScatteringLength));
        let m = ErfModel::taylor(S, vec![1.0, 1.0]).unwrap();
        assert_eq!(ere_parameters(&m), Err(Error::InsufficientOrder(1)));
    }

    #[test]
    fn model_validation() {
        assert!(ErfModel::pade(S, vec![1.0], vec![2.0]).is_err());
        assert!(ErfModel::pade(S, vec![], vec![1.0]).is_err());
        assert!(ErfModel::pade(S, vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn single_pole_reconstruction() {
        let poles = PoleSet::new(S, vec![0.5], Provenance::Manual).unwrap();
        let m = erf_from_poles(&poles).unwrap();
        assert_eq!(m.numerator(), &[-0.5]);
        assert_eq!(m.denominator(), &[1.0]);
        // [0/0] mapped through -1/a and r/2 would need a Taylor kind; a = 2 fm here.
        assert_relative_eq!(-1.0 / m.numerator()[0], 2.0);
    }

    #[test]
    fn cancelling_pair_is_degenerate() {
        let poles = PoleSet::new(S, vec![0.7, -0.7], Provenance::Manual).unwrap();
        assert!(matches!(erf_from_poles(&poles), Err(Error::DegeneratePole(_))));
    }

    #[test]
    fn two_pole_hand_expansion() {
        // A + B = 2 (k1 k2 - k^2), A - B = -2 i k (k1 + k2)
        // K = (k1 k2 - k^2) / (-(k1 + k2)) ... as P/Q with Q = 1
        let (k1, k2) = (0.3, 1.7);
        let poles = PoleSet::new(S, vec![k1, k2], Provenance::Manual).unwrap();
        let m = erf_from_poles(&poles).unwrap();
        let s = k1 + k2;
        assert_relative_eq!(m.numerator()[0], -k1 * k2 / s, max_relative = 1e-15);
        assert_relative_eq!(m.numerator()[1], 1.0 / s, max_relative = 1e-15);
        assert_eq!(m.denominator(), &[1.0]);
    }

    #[test]
    fn reconstruction_matches_arctangent_sum() {
        let kappas = vec![-0.0401, -0.7540, 0.6152, 2.0424, 4.1650, 4.6];
        let poles = PoleSet::new(S, kappas.clone(), Provenance::Manual).unwrap();
        let m = erf_from_poles(&poles).unwrap();
        assert_eq!(m.orders(), (3, 2));
        let grid: Vec<f64> = (1..=300).map(|i| 0.01 * i as f64).collect();
        let a = delta_from_model(&m, &grid).unwrap();
        let b = delta_from_kappas(&kappas, &grid);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sum_rule_violation_rejected() {
        let poles = PoleSet::new(D, vec![1.0, 2.0, 3.0, -1.0, 4.0], Provenance::Manual).unwrap();
        assert!(matches!(erf_from_poles(&poles), Err(Error::SumRuleViolation { alpha: 1, .. })));
    }
}
