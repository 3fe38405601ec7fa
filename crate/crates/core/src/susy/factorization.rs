//! Factorization solutions of the free centrifugal equation
//! `u'' = (l(l+1)/r^2 + kappa^2) u` at energy `-kappa^2`.
//!
//! For `kappa > 0` the solution is the left-regular modified Riccati–Bessel
//! function `x i_l(x)` (`sinh x` for l = 0, `~ x^(l+1)` at the origin, growing
//! at infinity). For `kappa < 0` it is the right-regular `x k_l(x)` with
//! `x = |kappa| r` (`e^(-x)` for l = 0, `~ x^(-l)` at the origin, decaying).
//! In both cases the exponential part is `e^(kappa r)`, which is factored out
//! and the stripped function `v = u e^(-kappa r)` is what the Wronskian
//! engine works with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::PartialWave;
use crate::poles::PoleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    /// Regular at the origin, exponentially growing.
    Left,
    /// Singular at the origin, exponentially decaying.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationSolution {
    pub kappa: f64,
    /// Factorization energy `-kappa^2` (fm^-2).
    pub epsilon: f64,
    pub regularity: Regularity,
    pub l: PartialWave,
}

impl FactorizationSolution {
    pub fn new(kappa: f64, l: PartialWave) -> Result<Self> {
        if !kappa.is_finite() || kappa == 0.0 {
            return Err(Error::UnsupportedPole(format!(
                "factorization solutions need a real nonzero kappa, got {kappa}"
            )));
        }
        let regularity = if kappa > 0.0 {
            Regularity::Left
        } else {
            Regularity::Right
        };
        Ok(Self {
            kappa,
            epsilon: -kappa * kappa,
            regularity,
            l,
        })
    }

    /// Derivatives `0..=max_order` of the stripped function
    /// `v(r) = u(r) e^(-kappa r)`.
    pub(crate) fn stripped_derivatives(&self, r: f64, max_order: usize) -> Vec<f64> {
        let l = self.l.l();
        let a = self.kappa.abs();
        let x = a * r;
        let (f, df) = match self.regularity {
            Regularity::Left => left_stripped(l, x),
            Regularity::Right => right_stripped(l, x),
        };
        let mut d = Vec::with_capacity(max_order + 1);
        d.push(f);
        if max_order == 0 {
            return d;
        }
        d.push(a * df);
        stripped_ode_derivatives(&mut d, self.l.centrifugal(), self.kappa, r, max_order);
        d
    }
}

/// Extends `[v, v']` to `v^(max_order)` using `v'' = (c/r^2) v - 2 kappa v'`,
/// the equation obeyed by `v = u e^(-kappa r)`.
pub(crate) fn stripped_ode_derivatives(
    d: &mut Vec<f64>,
    c: f64,
    kappa: f64,
    r: f64,
    max_order: usize,
) {
    if max_order < 2 {
        return;
    }
    // h^(j)(r) for h = c / r^2
    let mut h = Vec::with_capacity(max_order - 1);
    h.push(c / (r * r));
    let mut fact = 1.0; // (j+1)!
    let mut rp = r * r; // r^(j+2)
    for j in 1..max_order - 1 {
        fact *= (j + 1) as f64;
        rp *= r;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        h.push(sign * c * fact / rp);
    }
    for m in 0..=max_order - 2 {
        let mut binom = 1.0;
        let mut acc = -2.0 * kappa * d[m + 1];
        if c != 0.0 {
            for j in 0..=m {
                acc += binom * h[j] * d[m - j];
                binom = binom * (m - j) as f64 / (j + 1) as f64;
            }
        }
        d.push(acc);
    }
}

/// `sum_m a_m t^m` with `a_m = (l+m)! / (m! (l-m)!)`, and its derivative.
///
/// `x k_l(x) = e^-x P_l(1/(2x))` and
/// `x i_l(x) = (e^x P_l(-1/(2x)) - (-1)^l e^-x P_l(1/(2x))) / 2`.
fn bessel_poly(l: u32, t: f64) -> (f64, f64) {
    let coeffs = bessel_poly_coeffs(l);
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

pub(crate) fn bessel_poly_coeffs(l: u32) -> Vec<f64> {
    let mut coeffs = Vec::with_capacity(l as usize + 1);
    let mut a = 1.0;
    coeffs.push(a);
    for m in 0..l {
        a *= ((l + m + 1) * (l - m)) as f64 / (m + 1) as f64;
        coeffs.push(a);
    }
    coeffs
}

/// Below `SERIES_LIMIT + l` the power series is used for `x i_l(x)`.
const SERIES_LIMIT: f64 = 2.0;

/// `(v, dv/dx)` for `v = x i_l(x) e^-x`.
pub(crate) fn left_stripped(l: u32, x: f64) -> (f64, f64) {
    if l == 0 {
        return (-0.5 * (-2.0 * x).exp_m1(), (-2.0 * x).exp());
    }
    if x < SERIES_LIMIT + l as f64 {
        // the closed form cancels badly near the origin
        let scale = (-x).exp();
        let il = riccati_i_series(l, x);
        let il1 = riccati_i_series(l + 1, x);
        let deriv = il1 + (l as f64 + 1.0) / x * il - il;
        (il * scale, deriv * scale)
    } else {
        let t = 0.5 / x;
        let (pm, dpm) = bessel_poly(l, -t);
        let (pp, dpp) = bessel_poly(l, t);
        let e2 = (-2.0 * x).exp();
        let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
        let v = 0.5 * (pm - sign * e2 * pp);
        let dv = 0.5 * (dpm * t / x + sign * e2 * (2.0 * pp + dpp * t / x));
        (v, dv)
    }
}

/// `x i_l(x) = x^(l+1)/(2l+1)!! sum_k (x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))`.
fn riccati_i_series(l: u32, x: f64) -> f64 {
    let mut lead = x;
    for n in 1..=l {
        lead *= x / (2 * n + 1) as f64;
    }
    let h = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..400 {
        term *= h / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    lead * sum
}

/// `(v, dv/dx)` for `v = x k_l(x) e^x`, with `x k_0(x) = e^-x`.
pub(crate) fn right_stripped(l: u32, x: f64) -> (f64, f64) {
    let t = 0.5 / x;
    let (p, dp) = bessel_poly(l, t);
    (p, -dp * t / x)
}

/// `u^(m) e^(-kappa r) = sum_k C(m,k) kappa^(m-k) v^(k)`.
pub(crate) fn unstrip(v: &[f64], kappa: f64, m: usize) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for k in 0..=m {
        acc += binom * kappa.powi((m - k) as i32) * v[k];
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    acc
}

/// Pole classification and singularity strength `nu = l + n_left - n_right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub solutions: Vec<FactorizationSolution>,
    pub n_left: usize,
    pub n_right: usize,
    pub nu: i64,
}

pub fn classify_poles(poles: &PoleSet) -> Result<Classification> {
    let l = poles.l();
    let solutions = poles
        .kappas()
        .iter()
        .map(|&k| FactorizationSolution::new(k, l))
        .collect::<Result<Vec<_>>>()?;
    let n_left = solutions
        .iter()
        .filter(|s| s.regularity == Regularity::Left)
        .count();
    let n_right = solutions.len() - n_left;
    Ok(Classification {
        solutions,
        n_left,
        n_right,
        nu: l.l() as i64 + n_left as i64 - n_right as i64,
    })
}

/// `u, u', ..., u^(max_order)` at `r` (unscaled).
pub fn u_eval(sol: &FactorizationSolution, r: f64, max_order: usize) -> Result<Vec<f64>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be > 0, got {r}")));
    }
    let scale = (sol.kappa * r).exp();
    let v = sol.stripped_derivatives(r, max_order);
    Ok((0..=max_order)
        .map(|m| scale * unstrip(&v, sol.kappa, m))
        .collect())
}
