//! Fixed-point solution of `^C D_t^α U = ÃU + f(U) + P`, `U(0) = Q`,
//! `U_t(0) = u₁`, for `α ∈ (1, 2)`.
//!
//! Both representations are summed as operator series, so no kernel is
//! ever sampled at a singular point:
//!
//! * kernel form: `∫₀ᵗ (t-τ)^{α-1} E_{α,α}((t-τ)^α Ã) G dτ = Σₙ Ãⁿ J^{(n+1)α} G`
//! * RL form: `∫₀ᵗ K(t-τ) D^{2-α} G dτ = Σₙ Ãⁿ J^{nα+2} D^{2-α} G` with the
//!   order-one antiderivative `K(s) = ∫₀ˢ S_α(r) dr = s E_{α,2}(s^α Ã)`.
//!
//! Each `J` is exact against the interpolant of the data (piecewise linear
//! for `G`, piecewise constant for the inner derivative), and the sums run in
//! Horner form with a majorant-certified truncation.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::fractional::{
    caputo_derivative_with_velocity, cell_integral, cell_slopes, rl_integral, sobolev_norm, GridFunction,
    SpatialGrid, TimeMesh, Trajectory,
};
use crate::par::par_map;
use crate::solution::{loglog_slope, SolutionOperatorEvaluator, CONDITION_LIMIT};
use crate::special::gamma;

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Consecutive growing updates that count as divergence.
pub const DIVERGENCE_STREAK: usize = 5;
const LIPSCHITZ_RANGE: f64 = 4.0;
const LIPSCHITZ_SAMPLES: usize = 2001;

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinearityKind {
    Zero,
    /// `u ↦ a sin u`
    ScaledSine(f64),
    /// `u ↦ a u / (1 + u²)`
    CubicSaturating(f64),
    Expression(Expr),
}

/// Pointwise nonlinearity `f`, checked for `f(0) = 0` and a finite sampled
/// Lipschitz constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    lipschitz: f64,
    flat_at_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearitySummary {
    pub label: String,
    pub lipschitz: f64,
    pub vanishes_at_zero: bool,
    /// `f'(0) = 0`; the uniqueness argument assumes it, runs proceed without it.
    pub derivative_vanishes_at_zero: bool,
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            lipschitz: 0.0,
            flat_at_zero: true,
        }
    }

    pub fn scaled_sine(a: f64) -> Result<Self> {
        Self::from_kind(NonlinearityKind::ScaledSine(a))
    }

    pub fn cubic_saturating(a: f64) -> Result<Self> {
        Self::from_kind(NonlinearityKind::CubicSaturating(a))
    }

    /// From an expression in `u`.
    pub fn expression(e: Expr) -> Result<Self> {
        if e.variables().contains(&Var::X) {
            return Err(Error::InvalidParameter(format!("f = \"{e}\" may only depend on u")));
        }
        Self::from_kind(NonlinearityKind::Expression(e))
    }

    pub fn from_kind(kind: NonlinearityKind) -> Result<Self> {
        if let NonlinearityKind::Zero = kind {
            return Ok(Self::zero());
        }
        let mut n = Nonlinearity {
            kind,
            lipschitz: 0.0,
            flat_at_zero: false,
        };
        let f = |u: f64| n.eval(C64::new(u, 0.0)).re;
        let f0 = n.eval(C64::new(0.0, 0.0));
        if !(f0.norm() <= 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "f({}) at u = 0 is {f0}, but f(0) = 0 is required",
                n.label()
            )));
        }
        let du = 2.0 * LIPSCHITZ_RANGE / (LIPSCHITZ_SAMPLES - 1) as f64;
        let mut lip = 0.0f64;
        let mut prev = f(-LIPSCHITZ_RANGE);
        for i in 1..LIPSCHITZ_SAMPLES {
            let cur = f(-LIPSCHITZ_RANGE + i as f64 * du);
            lip = lip.max(((cur - prev) / du).abs());
            prev = cur;
        }
        if !lip.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "f({}) has no finite Lipschitz constant on [-{LIPSCHITZ_RANGE}, {LIPSCHITZ_RANGE}]",
                n.label()
            )));
        }
        let h = 1e-5;
        let slope0 = (f(h) - f(-h)) / (2.0 * h);
        n.lipschitz = lip;
        n.flat_at_zero = slope0.abs() <= 1e-6;
        Ok(n)
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn label(&self) -> String {
        match &self.kind {
            NonlinearityKind::Zero => "0".into(),
            NonlinearityKind::ScaledSine(a) => format!("{a}*sin(u)"),
            NonlinearityKind::CubicSaturating(a) => format!("{a}*u/(1+u^2)"),
            NonlinearityKind::Expression(e) => e.source().into(),
        }
    }

    pub fn summary(&self) -> NonlinearitySummary {
        NonlinearitySummary {
            label: self.label(),
            lipschitz: self.lipschitz,
            vanishes_at_zero: true,
            derivative_vanishes_at_zero: self.flat_at_zero,
        }
    }

    pub fn eval(&self, u: C64) -> C64 {
        match &self.kind {
            NonlinearityKind::Zero => C64::new(0.0, 0.0),
            NonlinearityKind::ScaledSine(a) => u.sin() * a,
            NonlinearityKind::CubicSaturating(a) => u * *a / (u * u + 1.0),
            NonlinearityKind::Expression(e) => e.eval_complex(u),
        }
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        u.iter().map(|&v| self.eval(v)).collect()
    }
}

/// The approximate problem for one regularization level.
#[derive(Clone)]
pub struct CauchyProblem {
    pub evaluator: Arc<SolutionOperatorEvaluator>,
    pub nonlinearity: Nonlinearity,
    /// Forcing frames on the mesh nodes; `None` means `P ≡ 0`.
    pub forcing: Option<Vec<Vec<C64>>>,
    pub q: Vec<C64>,
    pub u1: Vec<C64>,
    pub mesh: TimeMesh,
    /// Weight in the state norm `(w Σ|uᵢ|²)^{1/2}`: `Δx` for grid states, 1 for plain vectors.
    pub norm_weight: f64,
}

impl CauchyProblem {
    pub fn new(evaluator: Arc<SolutionOperatorEvaluator>, q: Vec<C64>, mesh: TimeMesh) -> Result<Self> {
        if q.len() != evaluator.dim() {
            return Err(Error::Size(format!(
                "initial data of length {} for an operator of dimension {}",
                q.len(),
                evaluator.dim()
            )));
        }
        let alpha = evaluator.alpha;
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!("the solver needs alpha in (1, 2], got {alpha}")));
        }
        let dim = q.len();
        Ok(CauchyProblem {
            evaluator,
            nonlinearity: Nonlinearity::zero(),
            forcing: None,
            q,
            u1: vec![C64::new(0.0, 0.0); dim],
            mesh,
            norm_weight: 1.0,
        })
    }

    pub fn with_nonlinearity(mut self, f: Nonlinearity) -> Self {
        self.nonlinearity = f;
        self
    }

    pub fn with_forcing(mut self, frames: Vec<Vec<C64>>) -> Result<Self> {
        self.mesh.check_len(frames.len())?;
        if frames.iter().any(|f| f.len() != self.q.len()) {
            return Err(Error::Size("forcing frames must match the state dimension".into()));
        }
        self.forcing = Some(frames);
        Ok(self)
    }

    pub fn with_velocity(mut self, u1: Vec<C64>) -> Result<Self> {
        if u1.len() != self.q.len() {
            return Err(Error::Size("initial velocity must match the state dimension".into()));
        }
        self.u1 = u1;
        Ok(self)
    }

    pub fn with_norm_weight(mut self, w: f64) -> Self {
        self.norm_weight = w;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.evaluator.alpha
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn norm(&self, v: &[C64]) -> f64 {
        (self.norm_weight * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    fn sup_distance(&self, a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d: Vec<C64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                self.norm(&d)
            })
            .fold(0.0, f64::max)
    }

    /// `G = f(U) + P` node by node.
    fn source(&self, u: &[Vec<C64>]) -> Vec<Vec<C64>> {
        u.iter()
            .enumerate()
            .map(|(k, uk)| {
                let mut g = self.nonlinearity.apply(uk);
                if let Some(p) = &self.forcing {
                    for (gi, pi) in g.iter_mut().zip(&p[k]) {
                        *gi += pi;
                    }
                }
                g
            })
            .collect()
    }

    /// `S(t)Q + t E_{α,2}(t^α Ã) u₁`.
    pub fn homogeneous(&self) -> Result<Vec<Vec<C64>>> {
        let nodes = self.mesh.nodes();
        let mut h = self.evaluator.trajectory(1.0, &nodes, &self.q)?;
        if self.u1.iter().any(|v| *v != C64::new(0.0, 0.0)) {
            let v = self.evaluator.trajectory(2.0, &nodes, &self.u1)?;
            for ((hk, vk), &t) in h.iter_mut().zip(&v).zip(&nodes) {
                for (a, b) in hk.iter_mut().zip(vk) {
                    *a += b * t;
                }
            }
        }
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Kernel,
    RiemannLiouville,
}

/// Inner derivative of order `2-α` in the RL form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerDerivative {
    /// Caputo when `G(0) = 0`, Riemann-Liouville otherwise.
    Auto,
    RiemannLiouville,
    /// Only valid when `G(0) = f(Q) + P(0) = 0`.
    Caputo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub series_tol: f64,
    pub representation: Representation,
    pub inner: InnerDerivative,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_PICARD_TOL,
            max_iter: DEFAULT_MAX_ITER,
            series_tol: 1e-14,
            representation: Representation::Kernel,
            inner: InnerDerivative::Auto,
        }
    }
}

impl SolveOptions {
    pub fn rl() -> Self {
        SolveOptions {
            representation: Representation::RiemannLiouville,
            ..Self::default()
        }
    }
}

pub struct SolverReport {
    pub trajectory: Trajectory,
    /// `U - S(t)Q - J S(t) u₁`.
    pub integral_term: Vec<Vec<C64>>,
    pub iterations: usize,
    /// Sup-in-time norm of each Picard update.
    pub changes: Vec<f64>,
    pub converged: bool,
    pub series_terms: usize,
    pub representation: Representation,
    /// Inner derivative actually used by the RL form.
    pub inner: Option<InnerDerivative>,
    pub source_at_zero: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub changes: Vec<f64>,
    pub converged: bool,
    pub series_terms: usize,
    pub representation: Representation,
    pub inner: Option<InnerDerivative>,
    pub source_at_zero: f64,
    pub sup_norm: f64,
}

impl SolverReport {
    pub fn summary(&self, p: &CauchyProblem) -> SolverSummary {
        SolverSummary {
            iterations: self.iterations,
            changes: self.changes.clone(),
            converged: self.converged,
            series_terms: self.series_terms,
            representation: self.representation,
            inner: self.inner,
            source_at_zero: self.source_at_zero,
            sup_norm: self.trajectory.frames.iter().map(|f| p.norm(f)).fold(0.0, f64::max),
        }
    }
}

fn is_zero_frames(g: &[Vec<C64>]) -> bool {
    g.iter().all(|f| f.iter().all(|v| *v == C64::new(0.0, 0.0)))
}

fn sup_vec_norm(g: &[Vec<C64>]) -> f64 {
    g.iter().map(|f| crate::fractional::vec_norm(f)).fold(0.0, f64::max)
}

/// `Σₙ Ãⁿ J_{γ₀+nα}` where `integrate(γ)` realizes `J_γ` on the data and
/// `data_sup` bounds the data. Truncated by the majorant
/// `‖Ã‖ⁿ T^{γ₀+nα} / Γ(γ₀+nα+1) · data_sup`.
fn operator_series(
    ev: &SolutionOperatorEvaluator,
    mesh: &TimeMesh,
    gamma0: f64,
    data_sup: f64,
    tol: f64,
    integrate: impl Fn(f64) -> Result<Vec<Vec<C64>>>,
) -> Result<(Vec<Vec<C64>>, usize)> {
    let alpha = ev.alpha;
    let a = ev.a_norm * (1.0 + 1e-5);
    if a == 0.0 || data_sup == 0.0 {
        return Ok((integrate(gamma0)?, 1));
    }
    let t = mesh.t_max();
    let log_term = |n: usize| {
        let g = gamma0 + n as f64 * alpha;
        n as f64 * a.ln() + g * t.ln() - crate::special::ln_gamma(g + 1.0) + data_sup.ln()
    };
    let mut largest = log_term(0);
    let mut majorant_sum = largest.exp();
    let mut m = 0;
    loop {
        let cur = log_term(m);
        let next = log_term(m + 1);
        largest = largest.max(next);
        majorant_sum += next.exp();
        let ratio = (next - cur).exp();
        if ratio < 0.5 && next.exp() / (1.0 - ratio) <= tol * largest.exp() {
            break;
        }
        m += 1;
        if m >= crate::solution::MAX_SERIES_TERMS {
            return Err(Error::Truncation(format!(
                "operator series for the Duhamel term did not converge (T^alpha ||A|| = {:.3e})",
                t.powf(alpha) * a
            )));
        }
    }
    let op = ev.operator();
    let mut acc = integrate(gamma0 + m as f64 * alpha)?;
    for n in (0..m).rev() {
        let j = integrate(gamma0 + n as f64 * alpha)?;
        acc = par_map(acc.len(), |k| {
            let mut v = op.apply(&acc[k]);
            for (vi, ji) in v.iter_mut().zip(&j[k]) {
                *vi += ji;
            }
            v
        });
    }
    let reference = sup_vec_norm(&acc).max(log_term(0).exp());
    let condition = majorant_sum / reference;
    if condition > CONDITION_LIMIT {
        return Err(Error::Range(format!(
            "Duhamel operator series loses {condition:.2e} to cancellation; T^alpha ||A|| = {:.3e} is \
             outside the accuracy envelope",
            t.powf(alpha) * a
        )));
    }
    Ok((acc, m + 1))
}

/// Inner derivative `D^{2-α} G` as cell values (constant on each cell).
fn inner_derivative_cells(mesh: &TimeMesh, g: &[Vec<C64>], alpha: f64, caputo: bool) -> Result<Vec<Vec<C64>>> {
    if caputo {
        // cell means of J^{α-1} G' = slopes of J^α G'
        let slopes = cell_slopes(mesh, g)?;
        cell_slopes(mesh, &cell_integral(mesh, &slopes, alpha)?)
    } else {
        // cell means of d/dt J^{α-1} G
        cell_slopes(mesh, &rl_integral(mesh, g, alpha - 1.0)?)
    }
}

/// Duhamel term for source `g` in the chosen representation.
fn duhamel_term(
    p: &CauchyProblem,
    g: &[Vec<C64>],
    opts: &SolveOptions,
    caputo: bool,
) -> Result<(Vec<Vec<C64>>, usize)> {
    let alpha = p.alpha();
    let mesh = &p.mesh;
    match opts.representation {
        Representation::Kernel => operator_series(&p.evaluator, mesh, alpha, sup_vec_norm(g), opts.series_tol, |gm| {
            rl_integral(mesh, g, gm)
        }),
        Representation::RiemannLiouville => {
            let d = inner_derivative_cells(mesh, g, alpha, caputo)?;
            let sup = sup_vec_norm(&d);
            operator_series(&p.evaluator, mesh, 2.0, sup, opts.series_tol, |gm| cell_integral(mesh, &d, gm))
        }
    }
}

/// Picard iteration on the whole window.
pub fn solve(p: &CauchyProblem, opts: &SolveOptions) -> Result<SolverReport> {
    let alpha = p.alpha();
    if opts.representation == Representation::RiemannLiouville && !(alpha < 2.0) {
        return Err(Error::InvalidParameter("the RL form needs alpha < 2".into()));
    }
    let h = p.homogeneous()?;
    let g0 = {
        let mut g = p.nonlinearity.apply(&p.q);
        if let Some(f) = &p.forcing {
            for (a, b) in g.iter_mut().zip(&f[0]) {
                *a += b;
            }
        }
        g
    };
    let source_at_zero = p.norm(&g0);
    let inner = match opts.representation {
        Representation::Kernel => None,
        Representation::RiemannLiouville => Some(match opts.inner {
            InnerDerivative::Auto if source_at_zero == 0.0 => InnerDerivative::Caputo,
            InnerDerivative::Auto => InnerDerivative::RiemannLiouville,
            InnerDerivative::Caputo if source_at_zero > 1e-12 => {
                return Err(Error::InvalidParameter(format!(
                    "the Caputo inner derivative needs f(Q) + P(0) = 0, got norm {source_at_zero:.3e}"
                )))
            }
            other => other,
        }),
    };
    let caputo = inner == Some(InnerDerivative::Caputo);

    let mut u = h.clone();
    let mut changes = Vec::new();
    let mut converged = false;
    let mut terms = 0;
    let mut streak = 0;
    for it in 1..=opts.max_iter.max(1) {
        let g = p.source(&u);
        let next = if is_zero_frames(&g) {
            h.clone()
        } else {
            let (integral, m) = duhamel_term(p, &g, opts, caputo)?;
            terms = terms.max(m);
            h.iter()
                .zip(&integral)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect()
        };
        let change = p.sup_distance(&next, &u);
        if !change.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite Picard update at iteration {it}; use a shorter horizon or a finer mesh"
            )));
        }
        if let Some(&prev) = changes.last() {
            streak = if change > prev { streak + 1 } else { 0 };
        }
        changes.push(change);
        u = next;
        let scale = u.iter().map(|f| p.norm(f)).fold(1.0, f64::max);
        // with f = 0 the source does not depend on U: one sweep is exact
        if p.nonlinearity.is_zero() || change <= opts.tol * scale {
            converged = true;
            break;
        }
        if streak >= DIVERGENCE_STREAK {
            return Err(Error::Divergence(format!(
                "Picard updates grew for {DIVERGENCE_STREAK} consecutive iterations (last {change:.3e}); \
                 use a shorter horizon or a finer mesh"
            )));
        }
    }
    let integral_term = u
        .iter()
        .zip(&h)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    Ok(SolverReport {
        trajectory: Trajectory::new(p.mesh.clone(), u)?,
        integral_term,
        iterations: changes.len(),
        changes,
        converged,
        series_terms: terms,
        representation: opts.representation,
        inner,
        source_at_zero,
    })
}

pub fn solve_kernel_form(p: &CauchyProblem, opts: &SolveOptions) -> Result<SolverReport> {
    solve(p, &SolveOptions { representation: Representation::Kernel, ..*opts })
}

pub fn solve_rl_form(p: &CauchyProblem, opts: &SolveOptions) -> Result<SolverReport> {
    solve(p, &SolveOptions { representation: Representation::RiemannLiouville, ..*opts })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub max_deviation: f64,
    /// Nodes before this time are not compared.
    pub t_min: f64,
}

/// Second time derivative of the Duhamel term against
/// `J^{α-1} G' + G(0) t^{α-2}/Γ(α-1) + Ã ∫ (t-τ)^{2α-3} E_{α,2α-2}((t-τ)^α Ã) G dτ`
/// on interior nodes with `t ≥ T/4`. The singular term is evaluated in
/// closed form at each node.
pub fn second_derivative_identity_check(report: &SolverReport, p: &CauchyProblem) -> Result<IdentityReport> {
    let alpha = p.alpha();
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter("the identity check needs alpha in (1, 2)".into()));
    }
    let mesh = &p.mesh;
    if mesh.n_steps() < 8 {
        return Err(Error::Size("the identity check needs at least 8 cells".into()));
    }
    let g = p.source(&report.trajectory.frames);
    let t_min = 0.25 * mesh.t_max();
    if is_zero_frames(&g) {
        return Ok(IdentityReport { max_deviation: 0.0, t_min });
    }
    let dt = mesh.dt();
    let first = cell_integral(mesh, &cell_slopes(mesh, &g)?, alpha - 1.0)?;
    let inv_g = 1.0 / gamma(alpha - 1.0)?;
    let (series, _) = operator_series(&p.evaluator, mesh, 2.0 * alpha - 2.0, sup_vec_norm(&g), 1e-14, |gm| {
        rl_integral(mesh, &g, gm)
    })?;
    let op = p.evaluator.operator();
    let i = &report.integral_term;
    let mut worst = 0.0f64;
    for k in 1..mesh.n_steps() {
        let t = mesh.node(k);
        if t < t_min {
            continue;
        }
        let third = op.apply(&series[k]);
        let sing = t.powf(alpha - 2.0) * inv_g;
        let diff: Vec<C64> = (0..p.dim())
            .map(|j| {
                let lhs = (i[k + 1][j] - i[k][j] * 2.0 + i[k - 1][j]) / (dt * dt);
                lhs - (first[k][j] + g[0][j] * sing + third[j])
            })
            .collect();
        worst = worst.max(p.norm(&diff));
    }
    Ok(IdentityReport { max_deviation: worst, t_min })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallReport {
    pub delta_norm: f64,
    /// `sup_t ‖U - V‖ / ‖δQ‖` at the full perturbation.
    pub k: f64,
    /// Same at one tenth of the perturbation.
    pub k_small: f64,
    pub relative_change: f64,
}

impl GronwallReport {
    /// Linear response: the two constants agree within `tol` (relative).
    pub fn stable(&self, tol: f64) -> bool {
        self.k.is_finite() && self.k_small.is_finite() && self.relative_change <= tol
    }
}

fn perturbed(p: &CauchyProblem, dq: &[C64], scale: f64) -> CauchyProblem {
    let mut v = p.clone();
    for (a, b) in v.q.iter_mut().zip(dq) {
        *a += b * scale;
    }
    v
}

/// Stability constant `K` in `sup_t ‖U - V‖ ≤ K ‖δQ‖`, measured at `δQ`
/// and `δQ/10`.
pub fn gronwall_stability_probe(p: &CauchyProblem, dq: &[C64], opts: &SolveOptions) -> Result<GronwallReport> {
    if dq.len() != p.dim() {
        return Err(Error::Size("perturbation must match the state dimension".into()));
    }
    let base = solve(p, opts)?;
    let delta_norm = p.norm(dq);
    if delta_norm == 0.0 {
        let again = solve(&perturbed(p, dq, 1.0), opts)?;
        let d = p.sup_distance(&base.trajectory.frames, &again.trajectory.frames);
        return Ok(GronwallReport { delta_norm, k: d, k_small: d, relative_change: 0.0 });
    }
    let mut ks = [0.0; 2];
    for (slot, scale) in ks.iter_mut().zip([1.0, 0.1]) {
        let v = solve(&perturbed(p, dq, scale), opts)?;
        *slot = p.sup_distance(&base.trajectory.frames, &v.trajectory.frames) / (delta_norm * scale);
    }
    Ok(GronwallReport {
        delta_norm,
        k: ks[0],
        k_small: ks[1],
        relative_change: (ks[0] - ks[1]).abs() / ks[0].max(f64::MIN_POSITIVE),
    })
}

/// `∂_t U` by central differences (second-order one-sided at the ends).
pub fn time_derivative(mesh: &TimeMesh, frames: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
    mesh.check_len(frames.len())?;
    let n = frames.len();
    if n < 3 {
        return Err(Error::Size("time derivative needs at least 3 nodes".into()));
    }
    let inv = 1.0 / (2.0 * mesh.dt());
    Ok((0..n)
        .map(|k| {
            let (a, b, c, w) = if k == 0 {
                (0, 1, 2, [-3.0, 4.0, -1.0])
            } else if k == n - 1 {
                (n - 3, n - 2, n - 1, [1.0, -4.0, 3.0])
            } else {
                (k - 1, k, k + 1, [-1.0, 0.0, 1.0])
            };
            (0..frames[k].len())
                .map(|j| (frames[a][j] * w[0] + frames[b][j] * w[1] + frames[c][j] * w[2]) * inv)
                .collect()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModerationRow {
    pub eps: f64,
    pub u_norm: Option<f64>,
    pub dt_norm: Option<f64>,
    pub caputo_norm: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModerationReport {
    /// Sobolev order of the recorded norms.
    pub beta: f64,
    pub rows: Vec<ModerationRow>,
    /// Fitted `N` in `M ε^{-N}` for `U`, `∂_t U`, `^C D^α U`; `None` when
    /// not applicable (all norms zero or too few rows).
    pub n_u: Option<f64>,
    pub n_dt: Option<f64>,
    pub n_caputo: Option<f64>,
}

impl ModerationReport {
    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            r.failure.is_none()
                && [r.u_norm, r.dt_norm, r.caputo_norm].iter().all(|v| v.is_some_and(f64::is_finite))
        })
    }

    pub fn exponents_finite(&self) -> bool {
        [self.n_u, self.n_dt, self.n_caputo].iter().all(|v| v.is_some_and(f64::is_finite))
    }
}

fn sup_sobolev(grid: &SpatialGrid, frames: &[Vec<C64>], beta: f64) -> Result<f64> {
    let mut s = 0.0f64;
    for f in frames {
        s = s.max(sobolev_norm(&GridFunction::new(grid, f.clone())?, beta)?);
    }
    Ok(s)
}

fn moderation_row(
    eps: f64,
    template: &dyn Fn(f64) -> Result<CauchyProblem>,
    grid: &SpatialGrid,
    beta: f64,
    opts: &SolveOptions,
) -> Result<ModerationRow> {
    let p = template(eps)?;
    let r = solve(&p, opts)?;
    let frames = &r.trajectory.frames;
    let du = time_derivative(&p.mesh, frames)?;
    let alpha = p.alpha();
    let cd = if alpha < 2.0 {
        caputo_derivative_with_velocity(&p.mesh, frames, &p.u1, alpha)?
    } else {
        return Err(Error::InvalidParameter("the moderateness scan needs alpha < 2".into()));
    };
    Ok(ModerationRow {
        eps,
        u_norm: Some(sup_sobolev(grid, frames, beta)?),
        dt_norm: Some(sup_sobolev(grid, &du, beta)?),
        caputo_norm: Some(sup_sobolev(grid, &cd, beta)?),
        failure: None,
    })
}

/// Solves the problem built by `template(ε)` for each `ε`, records sup-in-time
/// `H^β` norms and fits the moderateness exponents. Failed levels are kept
/// as marked rows.
pub fn moderateness_scan(
    template: &dyn Fn(f64) -> Result<CauchyProblem>,
    eps: &[f64],
    grid: &SpatialGrid,
    beta: f64,
    opts: &SolveOptions,
) -> ModerationReport {
    let rows: Vec<ModerationRow> = eps
        .iter()
        .map(|&e| {
            moderation_row(e, template, grid, beta, opts).unwrap_or_else(|err| ModerationRow {
                eps: e,
                u_norm: None,
                dt_norm: None,
                caputo_norm: None,
                failure: Some(err.to_string()),
            })
        })
        .collect();
    let fit = |pick: fn(&ModerationRow) -> Option<f64>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| pick(r).map(|v| (r.eps, v))).unzip();
        loglog_slope(&xs, &ys).map(|s| -s)
    };
    ModerationReport {
        beta,
        n_u: fit(|r| r.u_norm),
        n_dt: fit(|r| r.dt_norm),
        n_caputo: fit(|r| r.caputo_norm),
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NegligibilityReport {
    pub eps: f64,
    pub perturbation_norm: f64,
    pub difference: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Perturbs `Q` by `ε^8` along `direction` and checks that the solutions
/// stay within `ε^4` of each other.
pub fn negligibility_probe(
    p: &CauchyProblem,
    direction: &[C64],
    eps: f64,
    opts: &SolveOptions,
) -> Result<NegligibilityReport> {
    let n = p.norm(direction);
    if n == 0.0 || direction.len() != p.dim() {
        return Err(Error::InvalidParameter("perturbation direction must be non-zero and match the state".into()));
    }
    let size = eps.powi(8);
    let base = solve(p, opts)?;
    let v = solve(&perturbed(p, direction, size / n), opts)?;
    let difference = p.sup_distance(&base.trajectory.frames, &v.trajectory.frames);
    let bound = eps.powi(4);
    Ok(NegligibilityReport {
        eps,
        perturbation_norm: size,
        difference,
        bound,
        passed: difference <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseOperator, LinearOperator};
    use crate::special::{mittag_leffler_real};

    fn scalar_problem(alpha: f64, c: f64, q: f64, t: f64, n: usize) -> CauchyProblem {
        let op: Arc<dyn LinearOperator> = Arc::new(DenseOperator::scaled_identity(1, C64::new(c, 0.0)));
        let ev = Arc::new(SolutionOperatorEvaluator::new(alpha, op, c.abs()).unwrap());
        CauchyProblem::new(ev, vec![C64::new(q, 0.0)], TimeMesh::new(t, n).unwrap()).unwrap()
    }

    fn constant_forcing(p: &CauchyProblem, v: f64) -> Vec<Vec<C64>> {
        vec![vec![C64::new(v, 0.0); p.dim()]; p.mesh.n_nodes()]
    }

    #[test]
    fn unforced_matches_solution_operator() {
        let p = scalar_problem(1.5, -1.3, 0.8, 2.0, 64);
        let r = solve(&p, &SolveOptions::default()).unwrap();
        for (k, f) in r.trajectory.frames.iter().enumerate() {
            let e = 0.8 * mittag_leffler_real(1.5, 1.0, -1.3 * p.mesh.node(k).powf(1.5)).unwrap();
            assert!((f[0].re - e).abs() <= 1e-12);
        }
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn constant_forcing_closed_form() {
        let (a, c, q, pv) = (1.5, -2.0, 1.0, 0.7);
        let p = scalar_problem(a, c, q, 2.0, 128);
        let p = p.clone().with_forcing(constant_forcing(&p, pv)).unwrap();
        // the RL form carries G(0) t^{α-2} through cell means: O(Δt^α)
        for (opts, tol) in [(SolveOptions::default(), 1e-10), (SolveOptions::rl(), 1e-3)] {
            let r = solve(&p, &opts).unwrap();
            for (k, f) in r.trajectory.frames.iter().enumerate() {
                let t = p.mesh.node(k);
                let z = c * t.powf(a);
                let e = q * mittag_leffler_real(a, 1.0, z).unwrap()
                    + pv * t.powf(a) * mittag_leffler_real(a, a + 1.0, z).unwrap();
                assert!((f[0].re - e).abs() <= tol, "{k} {}", f[0].re - e);
            }
        }
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let p = scalar_problem(1.5, -1.0, 0.0, 1.0, 16).with_nonlinearity(Nonlinearity::scaled_sine(0.1).unwrap());
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert!(r.trajectory.frames.iter().flatten().all(|v| *v == C64::new(0.0, 0.0)));
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn initial_velocity_term() {
        let (a, c) = (1.5, -1.0);
        let p = scalar_problem(a, c, 0.5, 1.5, 32).with_velocity(vec![C64::new(2.0, 0.0)]).unwrap();
        let r = solve(&p, &SolveOptions::default()).unwrap();
        for (k, f) in r.trajectory.frames.iter().enumerate() {
            let t = p.mesh.node(k);
            let z = c * t.powf(a);
            let e = 0.5 * mittag_leffler_real(a, 1.0, z).unwrap() + 2.0 * t * mittag_leffler_real(a, 2.0, z).unwrap();
            assert!((f[0].re - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn nonlinear_picard_contracts_and_forms_agree() {
        let p = scalar_problem(1.5, -1.0, 1.0, 1.0, 128)
            .with_nonlinearity(Nonlinearity::scaled_sine(0.5).unwrap());
        let k = solve(&p, &SolveOptions::default()).unwrap();
        assert!(k.converged);
        assert!(k.changes.windows(2).skip(1).all(|w| w[1] < w[0]));
        let r = solve(&p, &SolveOptions::rl()).unwrap();
        assert_eq!(r.inner, Some(InnerDerivative::RiemannLiouville));
        assert!(k.trajectory.sup_distance(&r.trajectory) < 1e-4);
    }

    #[test]
    fn caputo_inner_derivative_requires_vanishing_source() {
        let p = scalar_problem(1.5, -1.0, 1.0, 1.0, 16);
        let p = p.clone().with_forcing(constant_forcing(&p, 1.0)).unwrap();
        let opts = SolveOptions { inner: InnerDerivative::Caputo, ..SolveOptions::rl() };
        assert!(matches!(solve(&p, &opts), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn nonlinearity_validation() {
        assert!(Nonlinearity::expression(Expr::parse("cos(u)").unwrap()).is_err());
        let f = Nonlinearity::expression(Expr::parse("0.1*sin(u)").unwrap()).unwrap();
        assert!((f.lipschitz() - 0.1).abs() < 1e-6);
        assert!(!f.summary().derivative_vanishes_at_zero);
        let g = Nonlinearity::expression(Expr::parse("u^3").unwrap()).unwrap();
        assert!(g.summary().derivative_vanishes_at_zero);
        assert!(Nonlinearity::cubic_saturating(2.0).unwrap().lipschitz() <= 2.0 + 1e-9);
    }

    #[test]
    fn identity_check_vanishes_without_source() {
        let p = scalar_problem(1.5, -1.0, 1.0, 1.0, 32);
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(second_derivative_identity_check(&r, &p).unwrap().max_deviation, 0.0);
    }

    #[test]
    fn gronwall_zero_perturbation_is_exact() {
        let p = scalar_problem(1.5, -1.0, 1.0, 1.0, 32).with_nonlinearity(Nonlinearity::scaled_sine(0.1).unwrap());
        let g = gronwall_stability_probe(&p, &[C64::new(0.0, 0.0)], &SolveOptions::default()).unwrap();
        assert_eq!(g.k, 0.0);
    }

    #[test]
    fn time_derivative_is_exact_on_quadratics() {
        let m = TimeMesh::new(1.0, 10).unwrap();
        let f: Vec<Vec<C64>> = m.nodes().iter().map(|t| vec![C64::new(t * t, 0.0)]).collect();
        let d = time_derivative(&m, &f).unwrap();
        for (k, v) in d.iter().enumerate() {
            assert!((v[0].re - 2.0 * m.node(k)).abs() < 1e-12);
        }
    }
}
