//! Mollified space operators `Ã_ε u = λ_ε · (D u * φ_{h_ε})`, the
//! ε-schedules that drive them, and association / norm diagnostics.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{
    apply_multiplier_raw, first_derivative_multiplier, l2_norm, liouville_multiplier, GridFunction,
    MultiplierKind, SpatialGrid,
};
use crate::linalg::{power_norm, DenseOperator, LinearOperator, NormEstimate, NORM_MAX_ITER, NORM_REL_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierShape {
    /// `c · exp(-1/(1-x²))` on `|x| < 1`.
    Bump,
    /// `c · exp(-(3x)²/2)` cut off at `|x| = 1`.
    TruncatedGaussian,
}

fn profile(shape: MollifierShape, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    match shape {
        MollifierShape::Bump => (-1.0 / (1.0 - x * x)).exp(),
        MollifierShape::TruncatedGaussian => (-4.5 * x * x).exp(),
    }
}

/// `1 / ∫_{-1}^{1} profile`, by the trapezoid rule (spectrally accurate for
/// the bump, whose derivatives all vanish at ±1) or in closed form.
pub fn normalization_constant(shape: MollifierShape) -> f64 {
    match shape {
        MollifierShape::Bump => {
            let n = 4096;
            let h = 2.0 / n as f64;
            let s: f64 = (1..n).map(|i| profile(shape, -1.0 + i as f64 * h)).sum();
            1.0 / (s * h)
        }
        MollifierShape::TruncatedGaussian => {
            let sqrt_two_pi = (2.0 * std::f64::consts::PI).sqrt();
            3.0 / (sqrt_two_pi * libm::erf(3.0 / std::f64::consts::SQRT_2))
        }
    }
}

/// `φ_h(x) = h φ(hx)` sampled on a periodic grid.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub shape: MollifierShape,
    pub h: f64,
    /// Continuous normalization constant `c` of the profile.
    pub normalization: f64,
    /// Samples at offsets `0, dx, …, -dx` (FFT order), discrete mass exactly 1.
    pub kernel: Vec<f64>,
    /// `dx · DFT(kernel)`; real because the kernel is even.
    pub symbol: Vec<C64>,
    grid: SpatialGrid,
}

impl Mollifier {
    pub fn new(shape: MollifierShape, h: f64, grid: &SpatialGrid) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("mollifier scale must be positive, got {h}")));
        }
        let dx = grid.dx();
        if 2.0 / h < 4.0 * dx {
            return Err(Error::Resolution(format!(
                "support diameter 2/h = {:.4e} is below four grid cells ({:.4e})",
                2.0 / h,
                4.0 * dx
            )));
        }
        if 1.0 / h > grid.half_length() {
            return Err(Error::Resolution(format!(
                "support radius 1/h = {:.4e} exceeds the half-length {} of the periodic domain",
                1.0 / h,
                grid.half_length()
            )));
        }
        let n = grid.n_points();
        let c = normalization_constant(shape);
        let mut kernel: Vec<f64> = (0..n)
            .map(|j| {
                let off = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 } * dx;
                h * c * profile(shape, h * off)
            })
            .collect();
        let mass = dx * kernel.iter().sum::<f64>();
        kernel.iter_mut().for_each(|v| *v /= mass);
        let mut symbol: Vec<C64> = kernel.iter().map(|&v| C64::new(v * dx, 0.0)).collect();
        grid.fft(&mut symbol);
        symbol.iter_mut().for_each(|s| s.im = 0.0);
        Ok(Mollifier {
            shape,
            h,
            normalization: c,
            kernel,
            symbol,
            grid: grid.clone(),
        })
    }

    pub fn discrete_mass(&self) -> f64 {
        self.grid.dx() * self.kernel.iter().sum::<f64>()
    }

    /// Number of grid points inside the support.
    pub fn support_points(&self) -> usize {
        self.kernel.iter().filter(|&&v| v > 0.0).count()
    }

    /// Periodic convolution `u * φ_h`.
    pub fn convolve(&self, u: &[C64]) -> Result<Vec<C64>> {
        apply_multiplier_raw(&self.grid, &self.symbol, u)
    }
}

pub fn make_mollifier(shape: MollifierShape, h: f64, grid: &SpatialGrid) -> Result<Mollifier> {
    Mollifier::new(shape, h, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleScenario {
    /// Growth allowed by the generation theorem, exponent `α`.
    Theorem,
    /// Time-fractional wave equation, exponent `α/5`.
    WaveTime,
    /// Time-space-fractional wave equation, exponent `α/5`.
    WaveTimeSpace,
}

/// `ε ≥ e^{-e}` is treated as outside the asymptotic regime.
pub const EPS_GUARD: f64 = 0.065_988_035_845_312_53;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleValue {
    pub eps: f64,
    pub h: f64,
    pub clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `log((log 1/ε)^{α-1}) = (α-1) log log(1/ε)`.
pub fn log_log_base(eps: f64, alpha: f64) -> f64 {
    (alpha - 1.0) * (1.0 / eps).ln().ln()
}

/// `κ · base^{p}` clamped to `[h_min, 1/ε]`, with `p = α` for the
/// theorem scenario and `α/5` for the wave scenarios.
pub fn h_schedule(
    eps: f64,
    alpha: f64,
    scenario: ScheduleScenario,
    kappa: f64,
    h_min: f64,
) -> Result<ScheduleValue> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) || !(h_min > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "schedule needs kappa >= 0 and h_min > 0, got {kappa} and {h_min}"
        )));
    }
    let upper = 1.0 / eps;
    if eps >= EPS_GUARD {
        return Ok(ScheduleValue {
            eps,
            h: h_min.min(upper),
            clamped: true,
            warning: Some(format!(
                "epsilon {eps} is not below e^(-e); using the floor h_min = {h_min}"
            )),
        });
    }
    let p = match scenario {
        ScheduleScenario::Theorem => alpha,
        ScheduleScenario::WaveTime | ScheduleScenario::WaveTimeSpace => alpha / 5.0,
    };
    let raw = kappa * log_log_base(eps, alpha).powf(p);
    let h = raw.clamp(h_min.min(upper), upper);
    Ok(ScheduleValue {
        eps,
        h,
        clamped: h != raw,
        warning: None,
    })
}

/// ε-grid plus every constant that turns it into operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps: Vec<f64>,
    pub alpha: f64,
    pub scenario: ScheduleScenario,
    pub kappa: f64,
    pub h_min: f64,
    /// Coefficient smoothing uses `φ_{ρ h_ε}`.
    pub coefficient_ratio: f64,
    /// Norm gate: `‖Ã_ε‖ ≤ κ_cap · max(h_min, base(ε)^α)`.
    pub kappa_cap: f64,
    /// Recorded cap for `‖λ_ε‖_{H²}`: `κ_λ · base^{α/2}` (floored at base 1).
    pub lambda_cap_kappa: f64,
}

pub const DEFAULT_KAPPA: f64 = 2.0;
pub const DEFAULT_H_MIN: f64 = 1.0;
pub const DEFAULT_COEFFICIENT_RATIO: f64 = 1.5;
pub const DEFAULT_KAPPA_CAP: f64 = 32.0;
pub const DEFAULT_LAMBDA_CAP_KAPPA: f64 = 16.0;

impl EpsilonSchedule {
    /// `ε_k = 2^{-k}` for `k` in `k_range`.
    pub fn dyadic(k_range: std::ops::RangeInclusive<u32>) -> Vec<f64> {
        k_range.map(|k| 0.5f64.powi(k as i32)).collect()
    }

    pub fn new(eps: Vec<f64>, alpha: f64, scenario: ScheduleScenario) -> Result<Self> {
        let s = EpsilonSchedule {
            eps,
            alpha,
            scenario,
            kappa: DEFAULT_KAPPA,
            h_min: DEFAULT_H_MIN,
            coefficient_ratio: DEFAULT_COEFFICIENT_RATIO,
            kappa_cap: DEFAULT_KAPPA_CAP,
            lambda_cap_kappa: DEFAULT_LAMBDA_CAP_KAPPA,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::InvalidParameter("epsilon schedule is empty".into()));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidParameter("every epsilon must lie in (0, 1)".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("epsilon schedule must be strictly decreasing".into()));
        }
        if !(self.coefficient_ratio > 0.0) || !(self.kappa_cap > 0.0) {
            return Err(Error::InvalidParameter("schedule constants must be positive".into()));
        }
        Ok(())
    }

    pub fn h(&self, eps: f64) -> Result<ScheduleValue> {
        h_schedule(eps, self.alpha, self.scenario, self.kappa, self.h_min)
    }

    /// `κ_cap · max(h_min, base(ε)^α)`; not clamped by `1/ε`.
    pub fn norm_cap(&self, eps: f64) -> Result<f64> {
        let unit = h_schedule(eps, self.alpha, ScheduleScenario::Theorem, 1.0, self.h_min)?;
        let base = if eps < EPS_GUARD {
            log_log_base(eps, self.alpha).powf(self.alpha)
        } else {
            unit.h
        };
        Ok(self.kappa_cap * base.max(self.h_min))
    }

    pub fn lambda_cap(&self, eps: f64) -> f64 {
        let base = if eps < EPS_GUARD { log_log_base(eps, self.alpha) } else { 0.0 };
        self.lambda_cap_kappa * base.max(1.0).powf(self.alpha / 2.0)
    }
}

/// One entry of the smoothed coefficient family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub h: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub h2_norm: f64,
}

/// `(‖λ‖² + ‖λ'‖² + ‖λ''‖²)^{1/2}` on the periodic grid.
pub fn h2_norm(values: &[f64], grid: &SpatialGrid) -> Result<f64> {
    let u: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    let d1m = first_derivative_multiplier(grid);
    let d1 = apply_multiplier_raw(grid, &d1m, &u)?;
    let d2 = apply_multiplier_raw(grid, &d1m, &d1)?;
    let dx = grid.dx();
    Ok((l2_norm(&u, dx).powi(2) + l2_norm(&d1, dx).powi(2) + l2_norm(&d2, dx).powi(2)).sqrt())
}

/// `λ_raw * φ_h` with its `H²` norm.
pub fn regularize_coefficient(
    lambda_raw: &[f64],
    h: f64,
    shape: MollifierShape,
    grid: &SpatialGrid,
) -> Result<CoefficientEntry> {
    grid.check_len(lambda_raw.len())?;
    let moll = Mollifier::new(shape, h, grid)?;
    let u: Vec<C64> = lambda_raw.iter().map(|&v| C64::new(v, 0.0)).collect();
    let values: Vec<f64> = moll.convolve(&u)?.into_iter().map(|z| z.re).collect();
    let h2 = h2_norm(&values, grid)?;
    Ok(CoefficientEntry { h, values, h2_norm: h2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    SecondDerivative,
    LiouvilleLeft,
    LiouvilleRight,
    Riesz,
}

impl OperatorKind {
    pub fn symbol(self, beta: f64, grid: &SpatialGrid) -> Result<Vec<C64>> {
        match self {
            OperatorKind::SecondDerivative => {
                Ok(grid.xi().iter().map(|&xi| C64::new(-xi * xi, 0.0)).collect())
            }
            OperatorKind::LiouvilleLeft => liouville_multiplier(MultiplierKind::Left, beta, grid),
            OperatorKind::LiouvilleRight => liouville_multiplier(MultiplierKind::Right, beta, grid),
            OperatorKind::Riesz => liouville_multiplier(MultiplierKind::Riesz, beta, grid),
        }
    }
}

/// `u ↦ λ ⊙ IFFT(φ̂ ⊙ m ⊙ FFT u)`, or without `φ̂` for the exact operator.
#[derive(Debug)]
pub struct RegularizedOperator {
    pub kind: OperatorKind,
    pub beta: f64,
    pub eps: Option<f64>,
    pub h: Option<f64>,
    pub lambda: Vec<f64>,
    pub lambda_h2_norm: f64,
    symbol: Vec<C64>,
    grid: SpatialGrid,
    norm: OnceLock<NormEstimate>,
}

impl Clone for RegularizedOperator {
    fn clone(&self) -> Self {
        let norm = OnceLock::new();
        if let Some(v) = self.norm.get() {
            let _ = norm.set(*v);
        }
        RegularizedOperator {
            kind: self.kind,
            beta: self.beta,
            eps: self.eps,
            h: self.h,
            lambda: self.lambda.clone(),
            lambda_h2_norm: self.lambda_h2_norm,
            symbol: self.symbol.clone(),
            grid: self.grid.clone(),
            norm,
        }
    }
}

/// Composes coefficient, mollifier and derivative symbol.
///
/// `SecondDerivative` always uses order 2 whatever `beta` says.
pub fn build_operator(
    kind: OperatorKind,
    beta: f64,
    lambda: &[f64],
    mollifier: Option<&Mollifier>,
    grid: &SpatialGrid,
) -> Result<RegularizedOperator> {
    grid.check_len(lambda.len())?;
    let beta = if kind == OperatorKind::SecondDerivative { 2.0 } else { beta };
    let mut symbol = kind.symbol(beta, grid)?;
    if let Some(m) = mollifier {
        if m.symbol.len() != symbol.len() {
            return Err(Error::Size("mollifier was built on a different grid".into()));
        }
        for (s, p) in symbol.iter_mut().zip(&m.symbol) {
            *s *= p;
        }
    }
    Ok(RegularizedOperator {
        kind,
        beta,
        eps: None,
        h: mollifier.map(|m| m.h),
        lambda: lambda.to_vec(),
        lambda_h2_norm: h2_norm(lambda, grid)?,
        symbol,
        grid: grid.clone(),
        norm: OnceLock::new(),
    })
}

/// Full pipeline for one ε: `h_ε`, mollifier, smoothed `λ_ε`, operator.
pub fn build_regularized(
    schedule: &EpsilonSchedule,
    eps: f64,
    kind: OperatorKind,
    beta: f64,
    lambda_raw: &[f64],
    shape: MollifierShape,
    grid: &SpatialGrid,
) -> Result<RegularizedOperator> {
    let h = schedule.h(eps)?.h;
    let moll = Mollifier::new(shape, h, grid)?;
    let coeff = regularize_coefficient(lambda_raw, schedule.coefficient_ratio * h, shape, grid)?;
    let mut op = build_operator(kind, beta, &coeff.values, Some(&moll), grid)?;
    op.eps = Some(eps);
    op.lambda_h2_norm = coeff.h2_norm;
    Ok(op)
}

impl RegularizedOperator {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Combined symbol `φ̂ · m`.
    pub fn symbol(&self) -> &[C64] {
        &self.symbol
    }

    pub fn scaled(&self, factor: f64) -> RegularizedOperator {
        let mut op = self.clone();
        op.lambda.iter_mut().for_each(|v| *v *= factor);
        op.lambda_h2_norm *= factor.abs();
        op.norm = OnceLock::new();
        op
    }

    pub fn apply_grid(&self, u: &GridFunction) -> Result<GridFunction> {
        self.grid.check_len(u.values.len())?;
        GridFunction::new(&self.grid, self.apply(&u.values))
    }

    pub fn materialize(&self) -> DenseOperator {
        DenseOperator::materialize(self)
    }

    /// Cached power-iteration estimate of `‖Ã‖`.
    pub fn operator_norm_estimate(&self) -> NormEstimate {
        *self
            .norm
            .get_or_init(|| power_norm(self, NORM_REL_TOL, NORM_MAX_ITER))
    }
}

impl LinearOperator for RegularizedOperator {
    fn dim(&self) -> usize {
        self.grid.n_points()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut v = apply_multiplier_raw(&self.grid, &self.symbol, x).expect("operator dimension");
        for (a, l) in v.iter_mut().zip(&self.lambda) {
            *a *= l;
        }
        v
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let y: Vec<C64> = x.iter().zip(&self.lambda).map(|(a, l)| a * l).collect();
        let conj: Vec<C64> = self.symbol.iter().map(|s| s.conj()).collect();
        apply_multiplier_raw(&self.grid, &conj, &y).expect("operator dimension")
    }
}

pub fn operator_norm_estimate(op: &RegularizedOperator) -> NormEstimate {
    op.operator_norm_estimate()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssociationRow {
    pub eps: f64,
    pub h: f64,
    /// `‖(A - Ã_ε) u‖_{L²}` per probe.
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssociationTable {
    pub rows: Vec<AssociationRow>,
    /// Per probe: errors strictly decrease along the ε list.
    pub strictly_decreasing: Vec<bool>,
}

/// `‖A u - Ã_ε u‖_{L²}` for every operator in `ops` and every probe.
pub fn association_diagnostic(
    exact: &RegularizedOperator,
    ops: &[RegularizedOperator],
    probes: &[GridFunction],
) -> Result<AssociationTable> {
    let dx = exact.grid.dx();
    let exact_actions: Vec<Vec<C64>> = probes.iter().map(|p| exact.apply(&p.values)).collect();
    let mut rows = Vec::with_capacity(ops.len());
    for op in ops {
        if op.grid != exact.grid {
            return Err(Error::Size("operators live on different grids".into()));
        }
        let errors = probes
            .iter()
            .zip(&exact_actions)
            .map(|(p, ex)| {
                let diff: Vec<C64> = op.apply(&p.values).iter().zip(ex).map(|(a, b)| a - b).collect();
                l2_norm(&diff, dx)
            })
            .collect();
        rows.push(AssociationRow {
            eps: op.eps.unwrap_or(f64::NAN),
            h: op.h.unwrap_or(f64::INFINITY),
            errors,
        });
    }
    let strictly_decreasing = (0..probes.len())
        .map(|p| rows.windows(2).all(|w| w[1].errors[p] < w[0].errors[p]))
        .collect();
    Ok(AssociationTable { rows, strictly_decreasing })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateRow {
    pub eps: f64,
    pub h: f64,
    pub norm: f64,
    pub cap: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormGateReport {
    pub kappa_cap: f64,
    pub rows: Vec<GateRow>,
    pub passed: bool,
}

impl NormGateReport {
    /// Converts a failed gate into [`Error::NormGate`].
    pub fn check(&self) -> Result<()> {
        if let Some(r) = self.rows.iter().find(|r| !r.passed) {
            return Err(Error::NormGate(format!(
                "at epsilon = {:e} the measured norm {:.6e} exceeds the cap {:.6e} \
                 (kappa_cap = {}, h = {:.6e}); reduce kappa or refine the schedule",
                r.eps, r.norm, r.cap, self.kappa_cap, r.h
            )));
        }
        Ok(())
    }
}

/// Compares `‖Ã_ε‖` with the schedule's cap for every operator.
pub fn norm_gate(schedule: &EpsilonSchedule, ops: &[RegularizedOperator]) -> Result<NormGateReport> {
    let mut rows = Vec::with_capacity(ops.len());
    for op in ops {
        let eps = op.eps.ok_or_else(|| Error::InvalidParameter("operator carries no epsilon".into()))?;
        let norm = op.operator_norm_estimate().value;
        let cap = schedule.norm_cap(eps)?;
        rows.push(GateRow {
            eps,
            h: op.h.unwrap_or(f64::INFINITY),
            norm,
            cap,
            passed: norm <= cap,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(NormGateReport { kappa_cap: schedule.kappa_cap, rows, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(16.0, 256).unwrap()
    }

    #[test]
    fn bump_constant() {
        // 1/∫exp(-1/(1-x²)) = 2.252283621043581…
        assert!((normalization_constant(MollifierShape::Bump) - 2.252_283_621_043_581).abs() < 1e-12);
        assert!(
            (normalization_constant(MollifierShape::TruncatedGaussian) - 1.0 / 0.833_286_963_161_031_7).abs()
                < 1e-12
        );
    }

    #[test]
    fn mollifier_mass_and_support() {
        let g = grid();
        for shape in [MollifierShape::Bump, MollifierShape::TruncatedGaussian] {
            for h in [0.1, 0.5, 2.0, 3.0] {
                let m = Mollifier::new(shape, h, &g).unwrap();
                assert!((m.discrete_mass() - 1.0).abs() < 1e-10);
                assert!(m.kernel.iter().all(|&v| v >= 0.0));
                assert!((m.symbol[0].re - 1.0).abs() < 1e-12);
            }
        }
        // support diameter 2/h, measured in grid cells
        for h in [0.5, 1.0, 2.0] {
            let pts = Mollifier::new(MollifierShape::Bump, h, &g).unwrap().support_points();
            assert!(((pts + 1) as f64 * g.dx() - 2.0 / h).abs() <= 2.0 * g.dx());
        }
    }

    #[test]
    fn unresolvable_widths() {
        let g = grid();
        assert!(matches!(Mollifier::new(MollifierShape::Bump, 5.0, &g), Err(Error::Resolution(_))));
        assert!(matches!(Mollifier::new(MollifierShape::Bump, 0.01, &g), Err(Error::Resolution(_))));
    }

    #[test]
    fn schedule_formula_and_clamps() {
        let v = h_schedule(0.5f64.powi(12), 1.5, ScheduleScenario::WaveTime, 1.0, 0.01).unwrap();
        let expected = (0.5 * (12.0 * 2f64.ln()).ln()).powf(0.3);
        assert!((v.h - expected).abs() < 1e-15);
        let floor = h_schedule(0.001, 1.5, ScheduleScenario::Theorem, 0.0, 0.7).unwrap();
        assert_eq!(floor.h, 0.7);
        assert!(floor.clamped);
        let guard = h_schedule(0.1, 1.5, ScheduleScenario::Theorem, 3.0, 0.7).unwrap();
        assert_eq!(guard.h, 0.7);
        assert!(guard.warning.is_some());
        let mut last = 0.0;
        for e in EpsilonSchedule::dyadic(1..=20) {
            let h = h_schedule(e, 1.7, ScheduleScenario::WaveTimeSpace, 2.0, 1.0).unwrap().h;
            assert!(h >= last && h <= 1.0 / e);
            last = h;
        }
    }

    #[test]
    fn coefficient_smoothing() {
        let g = grid();
        let c = regularize_coefficient(&vec![2.5; 256], 1.0, MollifierShape::Bump, &g).unwrap();
        assert!(c.values.iter().all(|v| (v - 2.5).abs() < 1e-13));
        // periodic step: two unit jumps, total variation 2
        let step: Vec<f64> = g.xs().iter().map(|&x| if x.abs() < 5.0 { 1.0 } else { 0.0 }).collect();
        let s = regularize_coefficient(&step, 1.0, MollifierShape::Bump, &g).unwrap();
        let tv: f64 = (0..256).map(|i| (s.values[(i + 1) % 256] - s.values[i]).abs()).sum();
        assert!((tv - 2.0).abs() < 1e-8, "{tv}");
        let norms: Vec<f64> = [2.0, 1.0, 0.5, 0.25]
            .iter()
            .map(|&h| regularize_coefficient(&step, h, MollifierShape::Bump, &g).unwrap().h2_norm)
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
    }

    #[test]
    fn zero_coefficient_gives_zero_operator() {
        let g = grid();
        let m = Mollifier::new(MollifierShape::Bump, 1.0, &g).unwrap();
        let op = build_operator(OperatorKind::SecondDerivative, 2.0, &vec![0.0; 256], Some(&m), &g).unwrap();
        assert_eq!(op.operator_norm_estimate().value, 0.0);
    }

    #[test]
    fn sharp_mollifier_recovers_symbol() {
        let g = SpatialGrid::new(16.0, 1024).unwrap();
        let xi0 = 4.0 * std::f64::consts::PI / 16.0;
        let u = GridFunction::from_fn(&g, |x| C64::from_polar(1.0, xi0 * x));
        let m = Mollifier::new(MollifierShape::Bump, 12.0, &g).unwrap();
        let op = build_operator(OperatorKind::LiouvilleLeft, 1.5, &vec![1.0; 1024], Some(&m), &g).unwrap();
        let v = op.apply(&u.values);
        let s = C64::new(0.0, xi0).powf(1.5);
        let err = v.iter().zip(&u.values).map(|(a, b)| (a - s * b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-3 * s.norm(), "{err}");
    }

    #[test]
    fn materialized_matches_streaming() {
        let g = SpatialGrid::new(8.0, 64).unwrap();
        let lam: Vec<f64> = g.xs().iter().map(|x| 1.0 + 0.5 / x.cosh()).collect();
        let m = Mollifier::new(MollifierShape::Bump, 1.0, &g).unwrap();
        let op = build_operator(OperatorKind::Riesz, 1.5, &lam, Some(&m), &g).unwrap();
        let dense = op.materialize();
        let u: Vec<C64> = (0..64).map(|j| C64::new((j as f64 * 0.3).sin(), 0.1 * j as f64)).collect();
        let a = op.apply(&u);
        let b = dense.apply(&u);
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() <= 1e-12 * scale));
    }

    #[test]
    fn norm_of_pure_multiplier() {
        let g = grid();
        let m = Mollifier::new(MollifierShape::Bump, 1.0, &g).unwrap();
        let op = build_operator(OperatorKind::SecondDerivative, 2.0, &vec![1.0; 256], Some(&m), &g).unwrap();
        let sup = op.symbol().iter().map(|s| s.norm()).fold(0.0, f64::max);
        let est = op.operator_norm_estimate();
        assert!((est.value - sup).abs() <= 1e-6 * sup, "{} vs {sup}", est.value);
        let twice = op.scaled(2.0).operator_norm_estimate().value;
        assert!((twice - 2.0 * est.value).abs() <= 1e-5 * est.value);
    }

    #[test]
    fn norms_grow_with_sharpness() {
        let g = grid();
        let lam: Vec<f64> = g.xs().iter().map(|x| 1.0 + 0.5 / x.cosh()).collect();
        let norms: Vec<f64> = [0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&h| {
                let m = Mollifier::new(MollifierShape::Bump, h, &g).unwrap();
                build_operator(OperatorKind::SecondDerivative, 2.0, &lam, Some(&m), &g)
                    .unwrap()
                    .operator_norm_estimate()
                    .value
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] >= w[0]), "{norms:?}");
    }

    #[test]
    fn real_in_real_out() {
        let g = grid();
        let lam: Vec<f64> = g.xs().iter().map(|x| 1.0 + 0.5 / x.cosh()).collect();
        let m = Mollifier::new(MollifierShape::Bump, 1.5, &g).unwrap();
        for kind in [OperatorKind::SecondDerivative, OperatorKind::Riesz] {
            let op = build_operator(kind, 1.5, &lam, Some(&m), &g).unwrap();
            let u = GridFunction::from_real_fn(&g, |x| (-x * x / 4.0).exp());
            let v = op.apply(&u.values);
            let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(v.iter().all(|z| z.im.abs() <= 1e-12 * scale));
        }
    }

    #[test]
    fn zero_probe_has_zero_association_error() {
        let g = grid();
        let lam = vec![1.0; 256];
        let exact = build_operator(OperatorKind::SecondDerivative, 2.0, &lam, None, &g).unwrap();
        let s = EpsilonSchedule::new(EpsilonSchedule::dyadic(4..=6), 1.5, ScheduleScenario::WaveTime).unwrap();
        let ops: Vec<_> = s
            .eps
            .iter()
            .map(|&e| build_regularized(&s, e, OperatorKind::SecondDerivative, 2.0, &lam, MollifierShape::Bump, &g).unwrap())
            .collect();
        let t = association_diagnostic(&exact, &ops, &[GridFunction::zeros(&g)]).unwrap();
        assert!(t.rows.iter().all(|r| r.errors[0] == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operators_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, shift in -3.0f64..3.0) {
            let g = SpatialGrid::new(8.0, 64).unwrap();
            let lam: Vec<f64> = g.xs().iter().map(|x| 1.0 + 0.5 / x.cosh()).collect();
            let m = Mollifier::new(MollifierShape::TruncatedGaussian, 1.0, &g).unwrap();
            for kind in [OperatorKind::SecondDerivative, OperatorKind::LiouvilleLeft, OperatorKind::LiouvilleRight, OperatorKind::Riesz] {
                let op = build_operator(kind, 1.5, &lam, Some(&m), &g).unwrap();
                let u: Vec<C64> = g.xs().iter().map(|&x| C64::new((-(x - shift).powi(2)).exp(), 0.0)).collect();
                let v: Vec<C64> = g.xs().iter().map(|&x| C64::new(0.0, (x / 3.0).sin())).collect();
                let w: Vec<C64> = u.iter().zip(&v).map(|(p, q)| p * a + q * b).collect();
                let lhs = op.apply(&w);
                let (ou, ov) = (op.apply(&u), op.apply(&v));
                let scale = lhs.iter().chain(&ou).map(|z| z.norm()).fold(1e-300, f64::max);
                for j in 0..64 {
                    prop_assert!((lhs[j] - (ou[j] * a + ov[j] * b)).norm() <= 1e-12 * scale * (1.0 + a.abs() + b.abs()));
                }
            }
        }
    }
}
