//! Reference values computed by routes independent of the production
//! kernels: exact big-integer arithmetic and dense eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_bigint::BigUint;

use crate::error::Result;
use crate::special::{mittag_leffler_extended, MlParams};
use num_complex::Complex64 as C64;

/// Decimal digits carried by the fixed-point oracle.
pub const ORACLE_DIGITS: u32 = 60;

fn scale() -> BigUint {
    BigUint::from(10u32).pow(ORACLE_DIGITS)
}

/// `⌊10^D / x⌋`-style arctan(1/x) series in fixed point.
fn arctan_inv(x: u32, one: &BigUint) -> BigUint {
    let x2 = BigUint::from(x * x);
    let mut power = one / BigUint::from(x);
    let mut sum = power.clone();
    let mut neg = BigUint::from(0u32);
    let mut k = 1u32;
    while power > BigUint::from(0u32) {
        power /= &x2;
        let term = &power / BigUint::from(2 * k + 1);
        if k % 2 == 1 {
            neg += term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum - neg
}

/// π·10^D by Machin's formula, with guard digits stripped by the caller.
fn pi_fixed(one: &BigUint) -> BigUint {
    BigUint::from(16u32) * arctan_inv(5, one) - BigUint::from(4u32) * arctan_inv(239, one)
}

/// `E_{1/2,1}(1)` as a decimal string with [`ORACLE_DIGITS`] digits after
/// the point.
///
/// Even terms give `Σ 1/m!`; odd terms use
/// `1/Γ(n + 3/2) = 4^{n+1} (n+1)! / ((2n+2)! √π)`, all in exact integers
/// scaled by `10^{D+10}`.
pub fn ml_half_one_at_one() -> String {
    let guard = BigUint::from(10u32).pow(10);
    let one = scale() * &guard;
    let zero = BigUint::from(0u32);
    // Σ 1/m!
    let mut even = zero.clone();
    let mut term = one.clone();
    let mut m = 1u32;
    while term > zero {
        even += &term;
        term /= BigUint::from(m);
        m += 1;
    }
    // Σ 4^{n+1} (n+1)! / (2n+2)!  (times one), term ratio 4(n+2)/((2n+3)(2n+4))
    let mut odd = zero.clone();
    let mut term = &one * BigUint::from(2u32); // n = 0: 4·1/2
    let mut n = 0u32;
    while term > zero {
        odd += &term;
        term = term * BigUint::from(4 * (n + 2)) / BigUint::from((2 * n + 3) * (2 * n + 4));
        n += 1;
    }
    let pi = pi_fixed(&one);
    let sqrt_pi = (pi * &one).sqrt();
    let total = even + odd * &one / sqrt_pi;
    let digits = (total / guard).to_string();
    let split = digits.len() - ORACLE_DIGITS as usize;
    format!("{}.{}", &digits[..split], &digits[split..])
}

/// `e (1 + erf 1)` from the closed form `E_{1/2,1}(z) = e^{z²} erfc(-z)`.
pub fn ml_half_one_at_one_erfc() -> f64 {
    std::f64::consts::E * (1.0 + libm::erf(1.0))
}

/// `V diag(E_{α,β}(t^α λ_i)) Vᵀ x` for a real symmetric `a` (row-major).
///
/// Scalar values come from the double-double series.
pub fn symmetric_ml_apply(a: &[f64], n: usize, alpha: f64, beta: f64, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let eig = SymmetricEigen::new(m);
    let p = MlParams::new(alpha, beta)?;
    let ta = t.powf(alpha);
    let mut f = Vec::with_capacity(n);
    for &l in eig.eigenvalues.iter() {
        f.push(mittag_leffler_extended(&p, C64::new(ta * l, 0.0))?.value.re);
    }
    let v = &eig.eigenvectors;
    let coeffs = v.transpose() * DVector::from_column_slice(x);
    let scaled = DVector::from_iterator(n, coeffs.iter().zip(&f).map(|(c, e)| c * e));
    Ok((v * scaled).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machin_pi() {
        let one = scale();
        let pi = pi_fixed(&one).to_string();
        assert!(pi.starts_with("314159265358979323846264338327950288419716939937510"), "{pi}");
    }

    #[test]
    fn half_order_value_is_frozen() {
        let s = ml_half_one_at_one();
        // e(1 + erf 1) to 58 digits, frozen from an independent arbitrary-precision run
        assert!(s.starts_with("5.008980080762283466309824598214809814694334684235666486188"), "{s}");
        let v: f64 = s.parse().unwrap();
        assert!((v - ml_half_one_at_one_erfc()).abs() / v < 1e-15);
    }

    #[test]
    fn eigen_oracle_on_diagonal() {
        let a = [-1.0, 0.0, 0.0, -4.0];
        let y = symmetric_ml_apply(&a, 2, 2.0, 1.0, 1.0, &[1.0, 1.0]).unwrap();
        assert!((y[0] - 1f64.cos()).abs() < 1e-14);
        assert!((y[1] - 2f64.cos()).abs() < 1e-14);
    }
}
