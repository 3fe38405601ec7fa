//! Real polynomials (ascending coefficient order), compensated arithmetic and
//! an all-roots solver.

use num_complex::Complex64;

/// Unevaluated sum `hi + lo` carrying roughly twice the precision of `f64`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        Self { hi, lo }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = two_sum(p, e);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Compensated sum of a sequence; result is independent of accumulation
/// artifacts up to double-double precision.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    xs.into_iter()
        .fold(DoubleDouble::default(), |acc, x| acc.add(DoubleDouble::from_f64(x)))
        .to_f64()
}

/// Elementary symmetric polynomials `e_0 = 1, e_1, ..., e_n` of `xs`,
/// accumulated in double-double precision.
pub(crate) fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut e = vec![DoubleDouble::default(); n + 1];
    e[0] = DoubleDouble::from_f64(1.0);
    for (i, &x) in xs.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] = e[k].add(e[k - 1].mul_f64(x));
        }
    }
    e.into_iter().map(DoubleDouble::to_f64).collect()
}

pub fn eval_real(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Value and first derivative at `z`.
fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Sum of |a_i| |z|^i, the natural scale for rounding error in `p(z)`.
pub(crate) fn abs_scale(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
}

/// Index of the highest nonzero coefficient, or `None` for the zero polynomial.
pub fn degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

const ABERTH_MAX_ITER: usize = 500;
const NEWTON_POLISH_ITER: usize = 3;

/// All complex roots of a real polynomial by Aberth–Ehrlich simultaneous
/// iteration, each root then polished by Newton steps. Returns `None` when the
/// iteration does not settle.
pub fn roots(coeffs: &[f64]) -> Option<Vec<Complex64>> {
    let n = degree(coeffs)?;
    let coeffs = &coeffs[..=n];
    if n == 0 {
        return Some(Vec::new());
    }
    // Exact zero roots are split off first.
    let zeros = coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
    let reduced = &coeffs[zeros..];
    let m = reduced.len() - 1;
    let mut out: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zeros];
    if m == 0 {
        return Some(out);
    }
    if m == 1 {
        out.push(Complex64::new(-reduced[0] / reduced[1], 0.0));
        return Some(out);
    }

    let lead = reduced[m];
    // Geometric-mean radius for the starting circle, bounded by Cauchy's bound.
    let radius = (reduced[0] / lead).abs().powf(1.0 / m as f64);
    let cauchy = 1.0
        + reduced[..m]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0_f64, f64::max);
    let radius = if radius.is_finite() && radius > 0.0 {
        radius.min(cauchy)
    } else {
        1.0
    };
    let mut z: Vec<Complex64> = (0..m)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64) / (m as f64) + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = false;
    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step = 0.0_f64;
        for i in 0..m {
            let (p, dp) = eval_with_derivative(reduced, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Accept a stalled iteration only if every residual is already tiny.
        let ok = z.iter().all(|&zi| {
            eval_complex(reduced, zi).norm() <= 1e-10 * abs_scale(reduced, zi)
        });
        if !ok {
            return None;
        }
    }

    for zi in z.iter_mut() {
        for _ in 0..NEWTON_POLISH_ITER {
            let (p, dp) = eval_with_derivative(reduced, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let cand = *zi - p / dp;
            if eval_complex(reduced, cand).norm() <= p.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    out.extend(z);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_symmetric_small() {
        let e = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn compensated_sum_recovers_cancelled_bits() {
        let s = compensated_sum([1e16, 1.0, -1e16]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn roots_of_known_cubic() {
        // (x - 1)(x + 2)(x - 3) = x^3 - 2x^2 - 5x + 6
        let mut r: Vec<f64> = roots(&[6.0, -5.0, -2.0, 1.0])
            .unwrap()
            .into_iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-12);
                z.re
            })
            .collect();
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_pair() {
        // x^2 + 1
        let r = roots(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.len(), 2);
        for z in r {
            assert!(z.re.abs() < 1e-14);
            assert!((z.im.abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_roots_split_off() {
        let r = roots(&[0.0, 0.0, -1.0, 1.0]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
    }

    #[test]
    fn wide_dynamic_range() {
        let truth = [-8.7653, -0.8827, -0.4294, 0.4376, 0.775];
        let e = elementary_symmetric(&truth);
        // monic polynomial prod (x - t): coefficient of x^k is (-1)^(n-k) e_{n-k}
        let n = truth.len();
        let coeffs: Vec<f64> = (0..=n)
            .map(|k| if (n - k) % 2 == 0 { e[n - k] } else { -e[n - k] })
            .collect();
        let mut r: Vec<f64> = roots(&coeffs).unwrap().iter().map(|z| z.re).collect();
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip(truth) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
