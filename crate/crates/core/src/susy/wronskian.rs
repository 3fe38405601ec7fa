//! Logarithmic derivatives of Wronskian determinants.
//!
//! Each column `u_j` is written as `e^(rate_j r) v_j` with the growth
//! stripped off, so the Wronskian matrix is `M_ij = e^(-rate_j r) u_j^(i)`
//! and `ln W = r sum_j rate_j + ln det M`. The derivatives of `ln det M` are
//! taken from Jacobi's formula,
//! `(ln det M)' = tr(M^-1 M')` and
//! `(ln det M)'' = tr(M^-1 M'') - tr((M^-1 M')^2)`,
//! with `M'` and `M''` built from analytic derivatives of `v_j`. Far from the
//! origin the `v_j` tend to constants plus exponentially small pieces, and
//! this form keeps those pieces at full relative precision.

use serde::{Deserialize, Serialize};

use super::factorization::{bessel_poly_coeffs, unstrip, FactorizationSolution};
use crate::error::{Error, Result};
use crate::linalg::Lu;

/// A column of a Wronskian: a function with analytically known derivatives.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ColumnFn {
    Factorization(FactorizationSolution),
    /// `e^(c r)`
    Exp { c: f64 },
    /// `sinh(kappa r + shift)`
    Sinh { kappa: f64, shift: f64 },
    /// `cosh(kappa r + shift)`
    Cosh { kappa: f64, shift: f64 },
    /// `factor * inner`
    Scaled { factor: f64, inner: Box<ColumnFn> },
}

impl ColumnFn {
    fn rate(&self) -> f64 {
        match *self {
            ColumnFn::Factorization(ref s) => s.kappa,
            ColumnFn::Exp { c } => c,
            ColumnFn::Sinh { kappa, .. } | ColumnFn::Cosh { kappa, .. } => kappa,
            ColumnFn::Scaled { ref inner, .. } => inner.rate(),
        }
    }

    /// Derivatives `0..=max_order` of `v = u e^(-rate r)`.
    fn stripped(&self, r: f64, max_order: usize) -> Vec<f64> {
        match *self {
            ColumnFn::Factorization(ref s) => s.stripped_derivatives(r, max_order),
            ColumnFn::Scaled { factor, ref inner } => {
                inner.stripped(r, max_order).into_iter().map(|v| factor * v).collect()
            }
            ColumnFn::Exp { .. } => {
                let mut v = vec![0.0; max_order + 1];
                v[0] = 1.0;
                v
            }
            ColumnFn::Sinh { kappa, shift } | ColumnFn::Cosh { kappa, shift } => {
                // (e^b -+ e^(-2kr - b)) / 2
                let sign = if matches!(self, ColumnFn::Sinh { .. }) { -1.0 } else { 1.0 };
                let decay = 0.5 * (-2.0 * kappa * r - shift).exp();
                let mut v = Vec::with_capacity(max_order + 1);
                v.push(0.5 * shift.exp() + sign * decay);
                let mut p = sign * decay;
                for _ in 1..=max_order {
                    p *= -2.0 * kappa;
                    v.push(p);
                }
                v
            }
        }
    }

    /// Laurent coefficients about the origin: `u(r) = sum_q c_q r^(low + q)`
    /// for `q < terms`.
    fn series(&self, terms: usize) -> (i32, Vec<f64>) {
        let inv_fact = |q: usize| (1..=q).fold(1.0, |a, i| a / i as f64);
        match *self {
            ColumnFn::Scaled { factor, ref inner } => {
                let (low, c) = inner.series(terms);
                (low, c.into_iter().map(|v| factor * v).collect())
            }
            ColumnFn::Factorization(ref s) => {
                let l = s.l.l() as i32;
                let a = s.kappa.abs();
                if s.kappa > 0.0 {
                    // x^(l+1)/(2l+1)!! sum_k x^2k / (2^k k! (2l+3)...(2l+2k+1))
                    let mut c = vec![0.0; terms];
                    let mut t = a.powi(l + 1);
                    for n in 1..=l {
                        t /= (2 * n + 1) as f64;
                    }
                    let mut k = 0;
                    while 2 * k < terms {
                        c[2 * k] = t;
                        k += 1;
                        t *= a * a / (2.0 * k as f64 * (2 * l + 2 * k as i32 + 1) as f64);
                    }
                    (l + 1, c)
                } else {
                    // e^-x sum_m b_m (2x)^-m, with x = a r
                    let b = bessel_poly_coeffs(s.l.l());
                    let c = (0..terms)
                        .map(|q| {
                            let p = q as i32 - l;
                            let mut acc = 0.0;
                            for (m, &bm) in b.iter().enumerate() {
                                let e = p + m as i32;
                                if e >= 0 {
                                    let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
                                    acc += sign * bm * 0.5_f64.powi(m as i32) * inv_fact(e as usize);
                                }
                            }
                            acc * a.powi(p)
                        })
                        .collect();
                    (-l, c)
                }
            }
            ColumnFn::Exp { c } => (0, (0..terms).map(|q| c.powi(q as i32) * inv_fact(q)).collect()),
            ColumnFn::Sinh { kappa, shift } | ColumnFn::Cosh { kappa, shift } => {
                let (even, odd) = if matches!(self, ColumnFn::Sinh { .. }) {
                    (shift.sinh(), shift.cosh())
                } else {
                    (shift.cosh(), shift.sinh())
                };
                let c = (0..terms)
                    .map(|q| {
                        let base = if q % 2 == 0 { even } else { odd };
                        base * kappa.powi(q as i32) * inv_fact(q)
                    })
                    .collect();
                (0, c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WronskianBundle {
    /// `ln|W|`.
    pub ln_abs_w: f64,
    /// `ln|W| - r sum_j rate_j`; differs from `ln_abs_w` by a linear function.
    pub ln_abs_w_scaled: f64,
    pub sign: f64,
    /// `(ln W)'`
    pub d1: f64,
    /// `(ln W)''`
    pub d2: f64,
}

/// Smallest `ln|det|` accepted as nonzero.
const LN_FLOOR: f64 = -690.0;

/// Below `SERIES_ARG / max|rate|` columns are taken from their series.
const SERIES_ARG: f64 = 4.0;
/// Series length beyond the lowest power.
const SERIES_TERMS: usize = 64;
/// Relative size under which a reduced series coefficient counts as zero.
const SERIES_ZERO: f64 = 1e-11;

pub(crate) fn bundle_for_columns(cols: &[ColumnFn], r: f64) -> Result<WronskianBundle> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be > 0, got {r}")));
    }
    let n = cols.len();
    if n == 0 {
        return Err(Error::InvalidInput("Wronskian of an empty set".into()));
    }
    let rate_sum: f64 = cols.iter().map(ColumnFn::rate).sum();
    let max_rate = cols.iter().fold(0.0_f64, |m, c| m.max(c.rate().abs()));
    if n > 1 && r * max_rate < SERIES_ARG {
        if let Some((reduced, ln_norm)) = reduce_series(cols) {
            let stripped: Vec<(f64, Vec<f64>)> = reduced
                .iter()
                .map(|(low, c)| (0.0, series_derivatives(*low, c, r, n + 1)))
                .collect();
            let mut b = jacobi_bundle(&stripped, r)?;
            b.ln_abs_w += ln_norm;
            b.ln_abs_w_scaled = b.ln_abs_w - rate_sum * r;
            return Ok(b);
        }
    }
    let stripped: Vec<(f64, Vec<f64>)> = cols
        .iter()
        .map(|c| (c.rate(), c.stripped(r, n + 1)))
        .collect();
    jacobi_bundle(&stripped, r)
}

/// Lowest power and coefficients of a truncated Laurent series.
type Laurent = (i32, Vec<f64>);

/// Column reduction on the series coefficients: constant column operations
/// (unit determinant) until every column has its own leading power. Near the
/// origin the original columns share leading powers and their Wronskian is
/// lost to cancellation; the reduced columns keep it at full precision.
///
/// Columns are first scaled to unit largest coefficient so that the pivot
/// order does not depend on their normalization; the returned `f64` is the
/// `ln` of the removed scale factors.
fn reduce_series(cols: &[ColumnFn]) -> Option<(Vec<Laurent>, f64)> {
    let mut ln_norm = 0.0;
    let mut raw: Vec<(i32, Vec<f64>)> = cols.iter().map(|c| c.series(SERIES_TERMS)).collect();
    for (_, v) in raw.iter_mut() {
        let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        ln_norm += m.ln();
        v.iter_mut().for_each(|x| *x /= m);
    }
    let low = raw.iter().map(|(s, _)| *s).min()?;
    let high = raw.iter().map(|(s, _)| *s).max()?;
    let len = SERIES_TERMS + (high - low) as usize;
    let mut c: Vec<Vec<f64>> = raw
        .iter()
        .map(|(s, v)| {
            let mut row = vec![0.0; len];
            let off = (s - low) as usize;
            row[off..off + v.len()].copy_from_slice(v);
            row
        })
        .collect();
    // truncation: powers beyond each column's own range are unknown
    let valid = SERIES_TERMS;
    let n = c.len();
    let mut lead: Vec<Option<usize>> = vec![None; n];
    for q in 0..valid {
        let scale = c.iter().fold(0.0_f64, |m, row| m.max(row[q].abs()));
        if scale == 0.0 {
            continue;
        }
        let pivot = (0..n)
            .filter(|&j| lead[j].is_none())
            .max_by(|&a, &b| c[a][q].abs().total_cmp(&c[b][q].abs()));
        let Some(b) = pivot else { break };
        if c[b][q].abs() <= SERIES_ZERO * scale {
            for j in (0..n).filter(|&j| lead[j].is_none()) {
                c[j][q] = 0.0;
            }
            continue;
        }
        lead[b] = Some(q);
        let pivot_row = c[b].clone();
        for j in 0..n {
            if j != b && lead[j].is_none() {
                let f = c[j][q] / pivot_row[q];
                if f != 0.0 {
                    for (x, y) in c[j].iter_mut().zip(&pivot_row).skip(q) {
                        *x -= f * y;
                    }
                }
                c[j][q] = 0.0;
            }
        }
        if lead.iter().all(Option::is_some) {
            break;
        }
    }
    if lead.iter().any(Option::is_none) {
        return None;
    }
    let reduced = c
        .into_iter()
        .zip(lead)
        .map(|(mut row, q)| {
            let q = q.expect("checked above");
            row.truncate(valid);
            (low + q as i32, row.split_off(q))
        })
        .collect();
    Some((reduced, ln_norm))
}

/// `d^m/dr^m sum_q c_q r^(low + q)` for `m = 0..=max_order`.
fn series_derivatives(low: i32, c: &[f64], r: f64, max_order: usize) -> Vec<f64> {
    (0..=max_order)
        .map(|m| {
            let mut acc = 0.0;
            let mut rp = r.powi(low - m as i32);
            for (q, &cq) in c.iter().enumerate() {
                let e = low + q as i32;
                let mut ff = 1.0;
                for i in 0..m as i32 {
                    ff *= (e - i) as f64;
                }
                acc += cq * ff * rp;
                rp *= r;
            }
            acc
        })
        .collect()
}

/// Jacobi-formula evaluation from stripped columns `(rate_j, v_j^(m))`.
fn jacobi_bundle(cols: &[(f64, Vec<f64>)], r: f64) -> Result<WronskianBundle> {
    let n = cols.len();
    let mut rate_sum = 0.0;
    let mut ln_norm = 0.0;
    let mut m0 = vec![0.0; n * n];
    let mut m1 = vec![0.0; n * n];
    let mut m2 = vec![0.0; n * n];
    for (j, (rate, v)) in cols.iter().enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite column value at r = {r}")));
        }
        rate_sum += rate;
        // unit columns: pivoting then ignores how each u_j was normalized
        let norm = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if norm == 0.0 {
            return Err(Error::WronskianNode { r });
        }
        ln_norm += norm.ln();
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let v = &v;
        for i in 0..n {
            m0[i * n + j] = unstrip(v, *rate, i);
            m1[i * n + j] = unstrip(&v[1..], *rate, i);
            m2[i * n + j] = unstrip(&v[2..], *rate, i);
        }
    }
    let lu = Lu::factor(m0, n);
    let l0 = lu.log_abs_det() + ln_norm;
    if lu.sign() == 0.0 || l0 < LN_FLOOR || !l0.is_finite() {
        return Err(Error::WronskianNode { r });
    }
    // X = M^-1 M' and Y = M^-1 M'', column by column
    let mut x = vec![0.0; n * n];
    let mut tr_y = 0.0;
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = m1[i * n + j];
        }
        let xj = lu.solve(&col);
        for i in 0..n {
            x[i * n + j] = xj[i];
            col[i] = m2[i * n + j];
        }
        tr_y += lu.solve(&col)[j];
    }
    let tr_x: f64 = (0..n).map(|i| x[i * n + i]).sum();
    let mut tr_x2 = 0.0;
    for i in 0..n {
        for k in 0..n {
            tr_x2 += x[i * n + k] * x[k * n + i];
        }
    }
    let d1 = rate_sum + tr_x;
    let d2 = tr_y - tr_x2;
    if !(d1.is_finite() && d2.is_finite()) {
        return Err(Error::Numeric(format!("non-finite Wronskian derivative at r = {r}")));
    }
    Ok(WronskianBundle {
        ln_abs_w: l0 + rate_sum * r,
        ln_abs_w_scaled: l0,
        sign: lu.sign(),
        d1,
        d2,
    })
}

/// `ln W`, `(ln W)'`, `(ln W)''` of the Wronskian of the given factorization
/// solutions at `r`.
pub fn wronskian_bundle(solutions: &[FactorizationSolution], r: f64) -> Result<WronskianBundle> {
    let cols: Vec<ColumnFn> = solutions.iter().copied().map(ColumnFn::Factorization).collect();
    bundle_for_columns(&cols, r)
}

/// As [`wronskian_bundle`] for the columns `norms[j] * u_j`. Only `ln|W|`
/// and the sign depend on the normalization.
pub fn wronskian_bundle_normalized(
    solutions: &[FactorizationSolution],
    norms: &[f64],
    r: f64,
) -> Result<WronskianBundle> {
    if norms.len() != solutions.len() || norms.iter().any(|c| *c == 0.0 || !c.is_finite()) {
        return Err(Error::InvalidInput(
            "one finite nonzero normalization per solution is required".into(),
        ));
    }
    let cols: Vec<ColumnFn> = solutions
        .iter()
        .zip(norms)
        .map(|(s, &factor)| ColumnFn::Scaled {
            factor,
            inner: Box::new(ColumnFn::Factorization(*s)),
        })
        .collect();
    bundle_for_columns(&cols, r)
}

/// Independent estimate of `(ln W)''`: five-point central differences of the
/// scaled `ln|W|` at steps `h` and `h/2`, Richardson-combined.
pub fn wronskian_bundle_fd(solutions: &[FactorizationSolution], r: f64) -> Result<f64> {
    let cols: Vec<ColumnFn> = solutions.iter().copied().map(ColumnFn::Factorization).collect();
    second_log_derivative_fd(&cols, r)
}

pub(crate) fn second_log_derivative_fd(cols: &[ColumnFn], r: f64) -> Result<f64> {
    let h = (r / 20.0).min(5e-3);
    let rate_sum: f64 = cols.iter().map(ColumnFn::rate).sum();
    // ln|W| minus the fixed linear function rate_sum * r
    let f = |x: f64| -> Result<f64> {
        let b = bundle_for_columns(cols, x)?;
        Ok(b.ln_abs_w - rate_sum * x)
    };
    let five_point = |h: f64| -> Result<f64> {
        let fm2 = f(r - 2.0 * h)?;
        let fm1 = f(r - h)?;
        let f0 = f(r)?;
        let fp1 = f(r + h)?;
        let fp2 = f(r + 2.0 * h)?;
        Ok((-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h))
    };
    let coarse = five_point(h)?;
    let fine = five_point(0.5 * h)?;
    Ok((16.0 * fine - coarse) / 15.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::PartialWave;
    use approx::assert_relative_eq;

    const S: PartialWave = PartialWave(0);

    #[test]
    fn single_left_solution() {
        let s = [FactorizationSolution::new(1.0, S).unwrap()];
        for &r in &[0.1, 1.0, 5.0, 40.0] {
            let b = wronskian_bundle(&s, r).unwrap();
            let sh = r.sinh();
            if r < 30.0 {
                assert_relative_eq!(b.ln_abs_w, sh.ln(), max_relative = 1e-13);
            }
            assert_relative_eq!(b.d1, 1.0 / r.tanh(), max_relative = 1e-13);
            let exact = -1.0 / (sh * sh);
            assert!((b.d2 - exact).abs() <= 1e-12 * exact.abs().max(1e-3), "r={r}");
        }
    }

    #[test]
    fn single_right_solution() {
        let s = [FactorizationSolution::new(-0.8, S).unwrap()];
        let b = wronskian_bundle(&s, 3.0).unwrap();
        assert_relative_eq!(b.ln_abs_w, -2.4, max_relative = 1e-14);
        assert_relative_eq!(b.d1, -0.8, max_relative = 1e-14);
        assert_eq!(b.d2, 0.0);
    }

    #[test]
    fn two_exponentials_have_linear_log() {
        let cols = [ColumnFn::Exp { c: 0.3 }, ColumnFn::Exp { c: -1.1 }];
        let b = bundle_for_columns(&cols, 2.0).unwrap();
        // W = (c2 - c1) e^{(c1 + c2) r}
        assert_relative_eq!(b.ln_abs_w, (1.4_f64).ln() - 1.6, max_relative = 1e-14);
        assert_eq!(b.sign, -1.0);
        assert!(b.d2.abs() < 1e-14);
    }

    #[test]
    fn shifted_hyperbolic_columns() {
        let cols = [ColumnFn::Cosh { kappa: 0.7, shift: -0.2 }];
        let r = 1.3;
        let b = bundle_for_columns(&cols, r).unwrap();
        let y: f64 = 0.7 * r - 0.2;
        assert_relative_eq!(b.ln_abs_w, y.cosh().ln(), max_relative = 1e-14);
        assert_relative_eq!(b.d1, 0.7 * y.tanh(), max_relative = 1e-14);
        assert_relative_eq!(b.d2, 0.49 / (y.cosh() * y.cosh()), max_relative = 1e-12);
    }

    #[test]
    fn node_detected() {
        // identical columns: W = 0
        let s = FactorizationSolution::new(1.0, S).unwrap();
        assert!(matches!(wronskian_bundle(&[s, s], 1.0), Err(Error::WronskianNode { .. })));
    }
}
