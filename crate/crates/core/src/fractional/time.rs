//! Time-fractional operators on a uniform [`TimeMesh`].
//!
//! `J^γ` uses product integration: the piecewise-linear interpolant of the
//! samples is integrated exactly against `(t-τ)^{γ-1}/Γ(γ)`. Derivatives are
//! built from cell slopes, so every kernel moment is exact and no
//! singularity has to be subtracted.

use num_complex::Complex64 as C64;

use super::mesh::TimeMesh;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::special::ln_gamma;

/// A value that can be sampled on a time mesh: a scalar or a state vector.
pub trait NodeValue: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
}

impl NodeValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl NodeValue for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
}

impl NodeValue for Vec<C64> {
    fn zero_like(&self) -> Self {
        vec![C64::new(0.0, 0.0); self.len()]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }
}

/// Product-integration weights of `J^γ` on a uniform mesh.
///
/// `J^γ f(t_n) = start[n] f_0 + Σ_{j=1}^{n} kernel[n-j] f_j`.
#[derive(Clone, Debug)]
pub(crate) struct ProductWeights {
    pub start: Vec<f64>,
    pub kernel: Vec<f64>,
}

impl ProductWeights {
    pub fn new(gamma: f64, dt: f64, n_max: usize) -> Self {
        let p = gamma + 1.0;
        let log_c = gamma * dt.ln() - ln_gamma(gamma + 2.0);
        let mut kernel = Vec::with_capacity(n_max + 1);
        kernel.push(log_c.exp());
        let mut start = Vec::with_capacity(n_max + 1);
        start.push(0.0);
        for k in 1..=n_max {
            let kf = k as f64;
            let scale = (log_c + p * kf.ln()).exp();
            let up = (p * (1.0 / kf).ln_1p()).exp_m1();
            let down = (p * (-1.0 / kf).ln_1p()).exp_m1();
            kernel.push(scale * (up + down));
            start.push(scale * (down + p / kf));
        }
        ProductWeights { start, kernel }
    }
}

/// `J^γ` of the samples, `γ ≥ 0`; `γ = 0` returns the input unchanged.
pub fn rl_integral<V: NodeValue>(mesh: &TimeMesh, f: &[V], gamma: f64) -> Result<Vec<V>> {
    mesh.check_len(f.len())?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration order must be >= 0, got {gamma}"
        )));
    }
    if gamma == 0.0 {
        return Ok(f.to_vec());
    }
    let w = ProductWeights::new(gamma, mesh.dt(), mesh.n_steps());
    Ok(par_map(mesh.n_nodes(), |n| {
        let mut acc = f[0].zero_like();
        if n == 0 {
            return acc;
        }
        acc.axpy(w.start[n], &f[0]);
        for j in 1..=n {
            acc.axpy(w.kernel[n - j], &f[j]);
        }
        acc
    }))
}

/// Forward-difference slopes `(f_{j+1} - f_j)/Δt`, one per cell.
pub fn cell_slopes<V: NodeValue>(mesh: &TimeMesh, f: &[V]) -> Result<Vec<V>> {
    mesh.check_len(f.len())?;
    let inv = 1.0 / mesh.dt();
    Ok(f.windows(2)
        .map(|w| {
            let mut s = w[1].clone();
            s.axpy(-1.0, &w[0]);
            let mut out = s.zero_like();
            out.axpy(inv, &s);
            out
        })
        .collect())
}

/// `J^μ` of a function that is constant on each mesh cell, evaluated
/// exactly at the nodes. `cells[j]` is the value on `[t_j, t_{j+1})`.
pub fn cell_integral<V: NodeValue>(mesh: &TimeMesh, cells: &[V], mu: f64) -> Result<Vec<V>> {
    if cells.len() != mesh.n_steps() {
        return Err(Error::Size(format!(
            "{} cell values for a mesh with {} cells",
            cells.len(),
            mesh.n_steps()
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "integration order must be positive, got {mu}"
        )));
    }
    let w = cell_weights(mu, mesh.dt(), mesh.n_steps());
    Ok(par_map(mesh.n_nodes(), |k| {
        let mut acc = cells[0].zero_like();
        for j in 0..k {
            acc.axpy(w[k - j], &cells[j]);
        }
        acc
    }))
}

/// `w[m] = [(mΔt)^μ - ((m-1)Δt)^μ] / Γ(μ+1)` for `m ≥ 1`.
pub(crate) fn cell_weights(mu: f64, dt: f64, n_max: usize) -> Vec<f64> {
    let lg = ln_gamma(mu + 1.0);
    let mut w = vec![0.0; n_max + 1];
    for (m, wm) in w.iter_mut().enumerate().skip(1) {
        let mf = m as f64;
        let scale = (mu * (mf * dt).ln() - lg).exp();
        *wm = -scale * (mu * (-1.0 / mf).ln_1p()).exp_m1();
    }
    w
}

/// Riemann-Liouville derivative of order `γ ∈ (0,1)`: forward differences
/// of `J^{1-γ} f`.
///
/// Entry `k` is the mean derivative over `[t_k, t_{k+1}]`, so it is a
/// second-order approximation at the cell midpoint. The last node repeats
/// the final cell.
pub fn rl_derivative<V: NodeValue>(mesh: &TimeMesh, f: &[V], gamma: f64) -> Result<Vec<V>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must lie in (0, 1), got {gamma}"
        )));
    }
    let g = rl_integral(mesh, f, 1.0 - gamma)?;
    let mut d = cell_slopes(mesh, &g)?;
    d.push(d[d.len() - 1].clone());
    Ok(d)
}

/// Caputo derivative of order `α ∈ (1,2)`.
///
/// The initial velocity is estimated by a one-sided second-order
/// difference; see [`caputo_derivative_with_velocity`].
pub fn caputo_derivative<V: NodeValue>(mesh: &TimeMesh, f: &[V], alpha: f64) -> Result<Vec<V>> {
    mesh.check_len(f.len())?;
    if f.len() < 4 {
        return Err(Error::Size(format!(
            "the Caputo derivative needs at least 4 nodes, got {}",
            f.len()
        )));
    }
    let inv = 1.0 / (2.0 * mesh.dt());
    let mut v0 = f[0].zero_like();
    v0.axpy(-3.0 * inv, &f[0]);
    v0.axpy(4.0 * inv, &f[1]);
    v0.axpy(-inv, &f[2]);
    caputo_derivative_with_velocity(mesh, f, &v0, alpha)
}

/// Caputo derivative with a known initial velocity `f'(0)`.
///
/// `f''` is replaced by a piecewise constant: second central differences on
/// the dual cells `[t_j - Δt/2, t_j + Δt/2]`, `(s_0 - f'(0))/(Δt/2)` on
/// `[0, Δt/2]`, and the last dual value repeated at the final node. `J^{2-α}`
/// of that function is then exact. Quadratics are reproduced exactly.
pub fn caputo_derivative_with_velocity<V: NodeValue>(
    mesh: &TimeMesh,
    f: &[V],
    v0: &V,
    alpha: f64,
) -> Result<Vec<V>> {
    mesh.check_len(f.len())?;
    if f.len() < 4 {
        return Err(Error::Size(format!(
            "the Caputo derivative needs at least 4 nodes, got {}",
            f.len()
        )));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "Caputo order must lie in (1, 2), got {alpha}"
        )));
    }
    let n = mesh.n_steps();
    let dt = mesh.dt();
    let s = cell_slopes(mesh, f)?;
    let mut c = Vec::with_capacity(n + 1);
    let mut c0 = s[0].clone();
    c0.axpy(-1.0, v0);
    let mut first = c0.zero_like();
    first.axpy(2.0 / dt, &c0);
    c.push(first);
    for j in 1..n {
        let mut d = s[j].zero_like();
        d.axpy(1.0 / dt, &s[j]);
        d.axpy(-1.0 / dt, &s[j - 1]);
        c.push(d);
    }
    c.push(c[n - 1].clone());

    // K_m = (m Δt/2)^{2-α} / Γ(3-α)
    let order = 2.0 - alpha;
    let lg = ln_gamma(3.0 - alpha);
    let half = 0.5 * dt;
    let kk: Vec<f64> = (0..=2 * n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                (order * (m as f64 * half).ln() - lg).exp()
            }
        })
        .collect();

    Ok(par_map(n + 1, |k| {
        let mut acc = f[0].zero_like();
        if k == 0 {
            return acc;
        }
        acc.axpy(kk[2 * k] - kk[2 * k - 1], &c[0]);
        for j in 1..k {
            let m = 2 * (k - j);
            acc.axpy(kk[m + 1] - kk[m - 1], &c[j]);
        }
        acc.axpy(kk[1], &c[k]);
        acc
    }))
}
