use serde::{Deserialize, Serialize};

use super::factorization::classify_poles;
use super::wronskian::{bundle_for_columns, second_log_derivative_fd, ColumnFn, WronskianBundle};
use crate::error::{Error, Result};
use crate::kinematics::PartialWave;
use crate::poles::PoleSet;

/// Below this radius the potential is continued analytically from its
/// `nu(nu+1)/r^2` core.
pub const R_MIN_EVAL: f64 = 1e-4;

/// Which closed form backs a [`PotentialModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluator {
    /// Wronskian of the factorization solutions for general `l`.
    Crum,
    /// S-wave Wronskian of exponentials and `sinh` columns.
    CompactWronskian,
    /// S-wave Wronskian with the exponential columns eliminated.
    CompactReduced,
}

/// An evaluatable inversion potential `r -> V(r)` in fm^-2.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    l: PartialWave,
    poles: PoleSet,
    n_left: usize,
    n_right: usize,
    nu: i64,
    evaluator: Evaluator,
    columns: Vec<ColumnFn>,
    /// Coefficient of the explicit `1/r^2` term in front of `-2 (ln W)''`.
    centrifugal: f64,
    r_min_eval: f64,
}

impl PotentialModel {
    pub(crate) fn from_parts(
        poles: PoleSet,
        evaluator: Evaluator,
        columns: Vec<ColumnFn>,
        centrifugal: f64,
    ) -> Result<Self> {
        let c = classify_poles(&poles)?;
        if c.nu < 0 {
            return Err(Error::UnsupportedSingularity { nu: c.nu });
        }
        let model = Self {
            l: poles.l(),
            n_left: c.n_left,
            n_right: c.n_right,
            nu: c.nu,
            poles,
            evaluator,
            columns,
            centrifugal,
            r_min_eval: R_MIN_EVAL,
        };
        model.check_nodeless()?;
        Ok(model)
    }

    pub fn l(&self) -> PartialWave {
        self.l
    }

    pub fn poles(&self) -> &PoleSet {
        &self.poles
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    /// Singularity strength: `V ~ nu(nu+1)/r^2` at the origin.
    pub fn nu(&self) -> i64 {
        self.nu
    }

    pub fn evaluator(&self) -> Evaluator {
        self.evaluator
    }

    pub fn r_min_eval(&self) -> f64 {
        self.r_min_eval
    }

    fn core(&self) -> f64 {
        (self.nu * (self.nu + 1)) as f64
    }

    pub fn bundle(&self, r: f64) -> Result<WronskianBundle> {
        bundle_for_columns(&self.columns, r)
    }

    fn direct(&self, r: f64) -> Result<f64> {
        let b = self.bundle(r)?;
        Ok(self.centrifugal / (r * r) - 2.0 * b.d2)
    }

    /// `V(r)` in fm^-2.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radius must be > 0, got {r}")));
        }
        if r >= self.r_min_eval {
            return self.direct(r);
        }
        let rm = self.r_min_eval;
        let remainder = self.direct(rm)? - self.core() / (rm * rm);
        Ok(self.core() / (r * r) + remainder)
    }

    /// `V(r) - l(l+1)/r^2`.
    pub fn central(&self, r: f64) -> Result<f64> {
        Ok(self.eval(r)? - self.l.centrifugal() / (r * r))
    }

    /// `-2 (ln W)''` by finite differences of `ln W` (cross-check path).
    pub fn eval_finite_difference(&self, r: f64) -> Result<f64> {
        let d2 = second_log_derivative_fd(&self.columns, r)?;
        Ok(self.centrifugal / (r * r) - 2.0 * d2)
    }

    /// `lim_{r->0} r^2 V(r)`, Richardson-extrapolated from `r = 1e-3` and
    /// `r = 1e-4` fm assuming an `r^2` correction.
    pub fn origin_coefficient(&self) -> Result<f64> {
        let (r1, r2) = (1e-3, 1e-4);
        let f1 = r1 * r1 * self.direct(r1)?;
        let f2 = r2 * r2 * self.direct(r2)?;
        Ok((f2 * r1 * r1 - f1 * r2 * r2) / (r1 * r1 - r2 * r2))
    }

    /// Same as [`origin_coefficient`](Self::origin_coefficient) for the central part.
    pub fn central_origin_coefficient(&self) -> Result<f64> {
        Ok(self.origin_coefficient()? - self.l.centrifugal())
    }

    /// Smallest radius on a 0.25 fm grid beyond which `|V - l(l+1)/r^2|`
    /// stays below `threshold` (checked out to twice that radius).
    pub fn tail_cutoff(&self, threshold: f64) -> Result<f64> {
        const STEP: f64 = 0.25;
        const LIMIT: f64 = 20_000.0;
        let mut r = 1.0;
        while r < LIMIT {
            if self.central(r)?.abs() < threshold {
                let mut ok = true;
                let mut s = r + STEP;
                while s <= 2.0 * r {
                    if self.central(s)?.abs() >= threshold {
                        ok = false;
                        r = s;
                        break;
                    }
                    s += STEP * (1.0 + s / 20.0);
                }
                if ok {
                    return Ok(r);
                }
            }
            r += STEP;
        }
        Err(Error::Numeric(format!(
            "potential does not fall below {threshold:e} before r = {LIMIT} fm"
        )))
    }

    /// Samples the Wronskian sign on a log + linear grid; a sign change or a
    /// vanishing determinant means an inadmissible pole configuration.
    fn check_nodeless(&self) -> Result<()> {
        let min_abs = self
            .poles
            .kappas()
            .iter()
            .fold(f64::INFINITY, |m, k| m.min(k.abs()));
        let r_far = (40.0 + 20.0 / min_abs).min(2000.0);
        let log_pts = (0..200).map(|i| 1e-3 * (1e3_f64).powf(i as f64 / 199.0));
        let lin_pts = (1..=300).map(|i| 1.0 + (r_far - 1.0) * i as f64 / 300.0);
        let mut sign = None;
        for r in log_pts.chain(lin_pts) {
            let b = self.bundle(r).map_err(|e| match e {
                Error::WronskianNode { r } => Error::WronskianNode { r },
                other => other,
            })?;
            match sign {
                None => sign = Some(b.sign),
                Some(s) if s != b.sign => return Err(Error::WronskianNode { r }),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Potential of the pole set from the Wronskian of the factorization solutions:
/// `V = l(l+1)/r^2 - 2 (ln W)''`.
pub fn build_potential(poles: &PoleSet) -> Result<PotentialModel> {
    let c = classify_poles(poles)?;
    let columns = c.solutions.into_iter().map(ColumnFn::Factorization).collect();
    PotentialModel::from_parts(poles.clone(), Evaluator::Crum, columns, poles.l().centrifugal())
}

/// Exponential fit `ln|V| = c - rate r` of a potential tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Decay rate (fm^-1).
    pub rate: f64,
    /// Intercept `c` of `ln|V|`.
    pub log_prefactor: f64,
    /// Sign of V in the window.
    pub sign: f64,
}

impl TailFit {
    pub fn prefactor(&self) -> f64 {
        self.sign * self.log_prefactor.exp()
    }
}

pub fn tail_decay_fit(pot: &PotentialModel, window: (f64, f64)) -> Result<TailFit> {
    tail_fit_samples(|r| pot.eval(r), window)
}

pub(crate) fn tail_fit_samples<F>(v: F, window: (f64, f64)) -> Result<TailFit>
where
    F: Fn(f64) -> Result<f64>,
{
    const SAMPLES: usize = 64;
    let (r0, r1) = window;
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::Domain(format!("invalid tail window [{r0}, {r1}]")));
    }
    let mut xs = Vec::with_capacity(SAMPLES);
    let mut ys = Vec::with_capacity(SAMPLES);
    let mut sign = 0.0;
    let mut prev_abs = f64::INFINITY;
    for i in 0..SAMPLES {
        let r = r0 + (r1 - r0) * i as f64 / (SAMPLES - 1) as f64;
        let val = v(r)?;
        let s = val.signum();
        if val == 0.0 || (sign != 0.0 && s != sign) || val.abs() >= prev_abs {
            return Err(Error::NonMonotoneTail { r0, r1 });
        }
        sign = s;
        prev_abs = val.abs();
        xs.push(r);
        ys.push(val.abs().ln());
    }
    let n = SAMPLES as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(TailFit {
        rate: -slope,
        log_prefactor: my - slope * mx,
        sign,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poles::Provenance;
    use approx::assert_relative_eq;

    const S: PartialWave = PartialWave(0);

    #[test]
    fn one_pole_closed_form() {
        for &kappa in &[0.3, 1.0, 3.0] {
            let p = PoleSet::new(S, vec![kappa], Provenance::Manual).unwrap();
            let v = build_potential(&p).unwrap();
            assert_eq!(v.nu(), 1);
            for i in 0..50 {
                let r = 0.05 + 0.3 * i as f64;
                let s = (kappa * r).sinh();
                let exact = 2.0 * kappa * kappa / (s * s);
                let got = v.eval(r).unwrap();
                assert!((got - exact).abs() <= 1e-12 * exact.max(1e-300) + 1e-300, "k={kappa} r={r}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn exponential_tail() {
        let fit = tail_fit_samples(|r| Ok((-2.0 * r).exp()), (5.0, 10.0)).unwrap();
        assert_relative_eq!(fit.rate, 2.0, epsilon = 1e-6);
        assert!(fit.log_prefactor.abs() < 1e-6);

        let p = PoleSet::new(S, vec![1.0], Provenance::Manual).unwrap();
        let fit = tail_decay_fit(&build_potential(&p).unwrap(), (5.0, 10.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-3);
    }

    #[test]
    fn tail_sign_change_rejected() {
        let err = tail_fit_samples(|r| Ok((r - 7.0) * (-r).exp()), (5.0, 10.0)).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTail { .. }));
    }

    #[test]
    fn negative_nu_rejected() {
        let p = PoleSet::new(S, vec![-0.5], Provenance::Manual).unwrap();
        assert_eq!(build_potential(&p).unwrap_err(), Error::UnsupportedSingularity { nu: -1 });
    }
}
