//! Small dense LU factorization.

/// LU factorization with partial pivoting of a row-major `n x n` matrix.
///
/// Rows are equilibrated by powers of two before elimination; the scaling is
/// exact and keeps pivoting meaningful when rows hold derivatives of very
/// different magnitude.
#[derive(Debug, Clone)]
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    row_scale: Vec<f64>,
    sign: f64,
    log_abs: f64,
}

impl Lu {
    pub fn factor(mut a: Vec<f64>, n: usize) -> Self {
        debug_assert_eq!(a.len(), n * n);
        let mut log_abs = 0.0;
        let mut row_scale = vec![1.0; n];
        for (i, s) in row_scale.iter_mut().enumerate() {
            let row = &mut a[i * n..(i + 1) * n];
            if let Some(e) = pow2_exponent(row.iter().fold(0.0_f64, |m, x| m.max(x.abs()))) {
                *s = (2.0_f64).powi(-e);
                row.iter_mut().for_each(|x| *x *= *s);
                log_abs += e as f64 * std::f64::consts::LN_2;
            }
        }
        // a pivot at rounding level of its column counts as exact zero
        let col_max: Vec<f64> = (0..n)
            .map(|j| (0..n).fold(0.0_f64, |m, i| m.max(a[i * n + j].abs())))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .expect("nonempty range");
            let p = a[pivot * n + col];
            if p.abs() <= 4.0 * f64::EPSILON * col_max[col] {
                sign = 0.0;
                log_abs = f64::NEG_INFINITY;
                break;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                perm.swap(pivot, col);
                sign = -sign;
            }
            if p < 0.0 {
                sign = -sign;
            }
            log_abs += p.abs().ln();
            for i in col + 1..n {
                let f = a[i * n + col] / p;
                a[i * n + col] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        a[i * n + j] -= f * a[col * n + j];
                    }
                }
            }
        }
        Self {
            n,
            lu: a,
            perm,
            row_scale,
            sign,
            log_abs,
        }
    }

    /// Sign of the determinant (0 when singular).
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// `ln|det|`.
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs
    }

    /// Solves `A x = b`. Must not be called on a singular factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self
            .perm
            .iter()
            .map(|&p| b[p] * self.row_scale[p])
            .collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

fn pow2_exponent(max_abs: f64) -> Option<i32> {
    if max_abs > 0.0 && max_abs.is_finite() {
        Some(max_abs.log2().round() as i32)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(a: Vec<f64>, n: usize) -> f64 {
        let lu = Lu::factor(a, n);
        lu.sign() * lu.log_abs_det().exp()
    }

    #[test]
    fn small_determinants() {
        assert!((det(vec![2.0], 1) - 2.0).abs() < 1e-15);
        assert!((det(vec![1.0, 2.0, 3.0, 4.0], 2) + 2.0).abs() < 1e-14);
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        assert!((det(a, 3) - 4.0).abs() < 1e-13);
        assert_eq!(Lu::factor(vec![1.0, 2.0, 2.0, 4.0], 2).sign(), 0.0);
    }

    #[test]
    fn badly_scaled_rows() {
        let lu = Lu::factor(vec![1e-200, 2e-200, 3e150, 4e150], 2);
        assert_eq!(lu.sign(), -1.0);
        assert!((lu.log_abs_det() - (2e-50_f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn solve_permuted_system() {
        let a = vec![0.0, 2.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let lu = Lu::factor(a.clone(), 3);
        let b = [5.0, 5.0, 6.0];
        let x = lu.solve(&b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-14);
        }
    }
}
