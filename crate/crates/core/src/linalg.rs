//! Small dense matrices over [`Scalar`], row-major.

use crate::calculus::Scalar;
use crate::error::EvalError;

/// Condition estimates above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e14;

pub fn identity<S: Scalar>(n: usize) -> Vec<S> {
    let mut out = vec![S::from_f64(0.0); n * n];
    for i in 0..n {
        out[i * n + i] = S::from_f64(1.0);
    }
    out
}

pub fn matmul<S: Scalar>(a: &[S], b: &[S], n: usize) -> Vec<S> {
    let mut out = vec![S::from_f64(0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = S::from_f64(0.0);
            for k in 0..n {
                acc = acc + a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n).map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// One-norm condition number from a matrix and its inverse.
pub fn condition(a: &[f64], inv: &[f64], n: usize) -> f64 {
    norm1(a, n) * norm1(inv, n)
}

/// Gauss-Jordan inverse with partial pivoting on the value parts.
pub fn invert<S: Scalar>(a: &[S], n: usize, what: &'static str) -> Result<Vec<S>, EvalError> {
    let mut m = a.to_vec();
    let mut inv = identity::<S>(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].value().abs().total_cmp(&m[j * n + col].value().abs()))
            .unwrap_or(col);
        if m[pivot * n + col].value() == 0.0 {
            return Err(EvalError::Singular { what, condition: f64::INFINITY });
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] = m[col * n + k] / d;
            inv[col * n + k] = inv[col * n + k] / d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f.value() == 0.0 && f.is_constant() {
                continue;
            }
            for k in 0..n {
                m[row * n + k] = m[row * n + k] - f * m[col * n + k];
                inv[row * n + k] = inv[row * n + k] - f * inv[col * n + k];
            }
        }
    }
    let av: Vec<f64> = a.iter().map(|s| s.value()).collect();
    let iv: Vec<f64> = inv.iter().map(|s| s.value()).collect();
    let cond = condition(&av, &iv, n);
    if !(cond <= MAX_CONDITION) {
        return Err(EvalError::Singular { what, condition: cond });
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_and_multiplies_back() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0];
        let inv = invert(&a, 3, "test").unwrap();
        let prod = matmul(&a, &inv, 3);
        let id = identity::<f64>(3);
        for (p, i) in prod.iter().zip(&id) {
            assert!((p - i).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(invert(&a, 2, "g"), Err(EvalError::Singular { what: "g", .. })));
    }

    #[test]
    fn needs_pivoting() {
        let a = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(invert(&a, 2, "t").unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
    }
}
