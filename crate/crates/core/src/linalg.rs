//! Minimal linear-operator abstraction shared by the dense test matrices
//! and the mollified grid operators.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional::vec_norm;

/// A bounded linear map on `C^n`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    n: usize,
    data: Vec<C64>,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Size(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(DenseOperator { n, data })
    }

    pub fn from_real(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(n, data.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn scaled_identity(n: usize, c: C64) -> Self {
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = c;
        }
        DenseOperator { n, data }
    }

    pub fn zero(n: usize) -> Self {
        DenseOperator {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn scaled(&self, s: f64) -> DenseOperator {
        DenseOperator {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Columns `A e_j` of any operator.
    pub fn materialize(op: &dyn LinearOperator) -> DenseOperator {
        let n = op.dim();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = op.apply(&e);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
            e[j] = C64::new(0.0, 0.0);
        }
        DenseOperator { n, data }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for (row, xi) in self.data.chunks(self.n).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * xi;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const NORM_REL_TOL: f64 = 1e-6;
pub const NORM_MAX_ITER: usize = 10_000;
const NORM_MIN_ITER: usize = 20;

/// Deterministic start vector with energy at every frequency
/// (splitmix64 hash of the index).
pub(crate) fn probe_vector(n: usize) -> Vec<C64> {
    fn mix(mut z: u64) -> f64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
    (0..n as u64)
        .map(|j| C64::new(mix(2 * j), mix(2 * j + 1)))
        .collect()
}

/// Largest singular value by power iteration on `A*A`.
///
/// Stops once the eigen-residual `‖A*A x - ρ x‖` of the normalized iterate
/// drops below `rel_tol · ρ` (after at least 20 steps), which bounds the
/// relative error of `ρ = ‖Ax‖²` by `rel_tol`.
pub fn power_norm(op: &dyn LinearOperator, rel_tol: f64, max_iter: usize) -> NormEstimate {
    power_iteration(op, rel_tol, max_iter).0
}

/// [`power_norm`] together with the final unit iterate, an approximate top
/// right singular vector.
pub fn power_iteration(op: &dyn LinearOperator, rel_tol: f64, max_iter: usize) -> (NormEstimate, Vec<C64>) {
    let n = op.dim();
    if n == 0 {
        return (NormEstimate { value: 0.0, iterations: 0, converged: true }, Vec::new());
    }
    let mut x = probe_vector(n);
    let nx = vec_norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        let y = op.apply(&x);
        sigma = vec_norm(&y);
        if sigma == 0.0 {
            return (NormEstimate { value: 0.0, iterations: it, converged: true }, x);
        }
        let z = op.apply_adjoint(&y);
        let rho = sigma * sigma;
        let residual = z
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b * rho).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if it >= NORM_MIN_ITER && residual <= rel_tol * rho {
            return (NormEstimate { value: sigma, iterations: it, converged: true }, x);
        }
        let nz = vec_norm(&z);
        x = z.into_iter().map(|v| v / nz).collect();
    }
    (NormEstimate { value: sigma, iterations: max_iter, converged: false }, x)
}

/// `factor · op`.
pub struct ScaledOperator<'a> {
    pub inner: &'a dyn LinearOperator,
    pub factor: f64,
}

impl LinearOperator for ScaledOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.inner.apply(x).into_iter().map(|v| v * self.factor).collect()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.inner.apply_adjoint(x).into_iter().map(|v| v * self.factor).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_apply_and_adjoint() {
        let a = DenseOperator::new(
            2,
            vec![C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, -1.0), C64::new(3.0, 0.0)],
        )
        .unwrap();
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        assert_eq!(a.apply(&x), vec![C64::new(1.0, 3.0), C64::new(0.0, 2.0)]);
        // <Ax, y> = <x, A*y>
        let y = vec![C64::new(0.5, -1.0), C64::new(2.0, 0.25)];
        let lhs: C64 = a.apply(&x).iter().zip(&y).map(|(u, v)| u * v.conj()).sum();
        let rhs: C64 = x.iter().zip(&a.apply_adjoint(&y)).map(|(u, v)| u * v.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-14);
        assert!(DenseOperator::new(3, vec![]).is_err());
    }

    #[test]
    fn power_norm_of_diagonal() {
        let mut data = vec![0.0; 16];
        for (i, d) in [1.0, -4.0, 2.5, 0.5].iter().enumerate() {
            data[i * 4 + i] = *d;
        }
        let a = DenseOperator::from_real(4, &data).unwrap();
        let est = power_norm(&a, NORM_REL_TOL, NORM_MAX_ITER);
        assert!(est.converged);
        assert!((est.value - 4.0).abs() < 1e-6 * 4.0);
        let z = power_norm(&DenseOperator::zero(5), NORM_REL_TOL, NORM_MAX_ITER);
        assert_eq!(z.value, 0.0);
        let twice = power_norm(&ScaledOperator { inner: &a, factor: 2.0 }, NORM_REL_TOL, NORM_MAX_ITER);
        assert!((twice.value - 8.0).abs() < 1e-5);
    }

    #[test]
    fn materialize_round_trip() {
        let a = DenseOperator::from_real(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.5]).unwrap();
        assert_eq!(DenseOperator::materialize(&a), a);
    }
}
