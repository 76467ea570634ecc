//! Scalar special functions: Γ, the Riemann-Liouville kernel `g_α`, the
//! two-parameter Mittag-Leffler function and its exponential envelope.
//!
//! `E_{α,β}(z) = Σ_{n≥0} zⁿ / Γ(β + nα)` is summed directly. The double
//! precision path is used whenever its rounding estimate fits the requested
//! tolerance; otherwise the same series is re-summed in double-double
//! arithmetic (see [`dd`]). Arguments with `|z| > 200`, or whose growth
//! `|z|^{1/α}` would overflow, are rejected with [`Error::Range`].

pub mod dd;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use dd::{Dd, DdComplex};

/// Largest `|z|` the double precision path is trusted with.
pub const DOUBLE_RANGE: f64 = 50.0;
/// Largest `|z|` accepted at all.
pub const EXTENDED_RANGE: f64 = 200.0;
const MAX_TERMS: usize = 10_000;
const DD_EPS: f64 = 4.93e-32;
/// Absolute error accepted from the extended path when the value itself is
/// (nearly) zero, far below one ulp of unity.
const ABS_FLOOR: f64 = 1e-3 * f64::EPSILON;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) on the real line.
///
/// Positive integers up to 22 are returned exactly; elsewhere a g = 7
/// Lanczos approximation with reflection for `x < 1/2` is used.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Domain(format!("gamma has a pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x == x.floor() && (1.0..=22.0).contains(&x) {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    // split the power to stay finite up to x ≈ 171
    let half = t.powf(0.5 * (x + 0.5));
    (2.0 * std::f64::consts::PI).sqrt() * half * (half * (-t).exp()) * a
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 15.0 {
        return gamma_unchecked(x).ln();
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + 0.918_938_533_204_672_8 + series
}

/// 1/Γ(x) for `x > 0`, underflowing gracefully to zero.
pub fn inv_gamma(x: f64) -> f64 {
    if x <= 170.0 {
        1.0 / gamma_unchecked(x)
    } else {
        (-ln_gamma(x)).exp()
    }
}

/// The Riemann-Liouville kernel `g_α(t) = t^{α-1}/Γ(α)` for `t > 0`, zero otherwise.
pub fn g_alpha(t: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t.powf(alpha - 1.0) * inv_gamma(alpha)
    }
}

/// Orders and tolerance for one Mittag-Leffler evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
}

impl MlParams {
    pub const DEFAULT_TOL: f64 = 1e-14;

    /// Validated parameters with the default tolerance.
    ///
    /// `α = 2` is admitted so that the cosine identities can be checked.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_tol(alpha, beta, Self::DEFAULT_TOL)
    }

    pub fn with_tol(alpha: f64, beta: f64, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must lie in (0, 1), got {tol}"
            )));
        }
        Ok(MlParams { alpha, beta, tol })
    }
}

/// A Mittag-Leffler value together with its truncation certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlEvaluation {
    pub value: C64,
    /// Number of series terms summed.
    pub terms: usize,
    /// Certified bound on the discarded tail.
    pub tail_bound: f64,
    /// `Σ|termₙ|`, used for the rounding estimate.
    pub abs_sum: f64,
    /// Whether the double-double path produced the value.
    pub extended: bool,
}

impl MlEvaluation {
    /// Estimated total error (tail plus rounding).
    pub fn error_estimate(&self) -> f64 {
        let eps = if self.extended { DD_EPS } else { f64::EPSILON };
        self.tail_bound + 4.0 * eps * self.abs_sum
    }
}

/// `E_{α,β}(z)` to relative accuracy `p.tol`.
pub fn mittag_leffler(p: &MlParams, z: C64) -> Result<C64> {
    mittag_leffler_detailed(p, z).map(|e| e.value)
}

/// Real-argument convenience wrapper.
pub fn mittag_leffler_real(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    let p = MlParams::new(alpha, beta)?;
    mittag_leffler(&p, C64::new(x, 0.0)).map(|v| v.re)
}

/// `E_{α,β}(z)` with the truncation certificate.
pub fn mittag_leffler_detailed(p: &MlParams, z: C64) -> Result<MlEvaluation> {
    let r = z.norm();
    if r == 0.0 {
        return Ok(MlEvaluation {
            value: C64::new(inv_gamma(p.beta), 0.0),
            terms: 1,
            tail_bound: 0.0,
            abs_sum: inv_gamma(p.beta).abs(),
            extended: false,
        });
    }
    check_range(p, r)?;
    if r <= DOUBLE_RANGE {
        let ev = series_f64(p, z)?;
        if ev.error_estimate() <= p.tol * ev.value.norm() {
            return Ok(ev);
        }
    }
    mittag_leffler_extended(p, z)
}

fn check_range(p: &MlParams, r: f64) -> Result<()> {
    if !r.is_finite() || r > EXTENDED_RANGE {
        return Err(Error::Range(format!(
            "|z| = {r:.3e} exceeds the series range {EXTENDED_RANGE} \
             (alpha = {}, beta = {})",
            p.alpha, p.beta
        )));
    }
    let growth = r.powf(1.0 / p.alpha);
    if growth > 690.0 {
        return Err(Error::Range(format!(
            "|z|^(1/alpha) = {growth:.3e} would overflow the series sum \
             (alpha = {}, |z| = {r})",
            p.alpha
        )));
    }
    Ok(())
}

/// log of |z|^n / Γ(β + nα)
fn log_term(ln_r: f64, p: &MlParams, n: usize) -> f64 {
    n as f64 * ln_r - ln_gamma(p.beta + n as f64 * p.alpha)
}

fn series_f64(p: &MlParams, z: C64) -> Result<MlEvaluation> {
    let r = z.norm();
    let ln_r = r.ln();
    let mut sum = C64::new(0.0, 0.0);
    let mut comp = C64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut zpow = C64::new(1.0, 0.0);
    let mut log_cur = log_term(ln_r, p, 0);
    for n in 0..MAX_TERMS {
        let arg = p.beta + n as f64 * p.alpha;
        let term = if arg <= 170.0 && zpow.norm().is_finite() {
            zpow * inv_gamma(arg)
        } else {
            let mag = log_term(ln_r, p, n).exp();
            let phase = z / r;
            phase.powu(n as u32) * mag
        };
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        abs_sum += term.norm();
        zpow *= z;

        let log_next = log_term(ln_r, p, n + 1);
        let ratio = (log_next - log_cur).exp();
        log_cur = log_next;
        if ratio < 0.5 {
            let tail = log_next.exp() / (1.0 - ratio);
            let floor = 0.01 * f64::EPSILON * abs_sum;
            if tail <= 0.25 * p.tol * sum.norm() || tail <= floor {
                return Ok(MlEvaluation {
                    value: sum,
                    terms: n + 1,
                    tail_bound: tail,
                    abs_sum,
                    extended: false,
                });
            }
        }
    }
    Err(Error::Truncation(format!(
        "E_{{{},{}}}({z}) did not reach tolerance in {MAX_TERMS} terms",
        p.alpha, p.beta
    )))
}

/// Forces the double-double summation path.
pub fn mittag_leffler_extended(p: &MlParams, z: C64) -> Result<MlEvaluation> {
    let r = z.norm();
    if r == 0.0 {
        return mittag_leffler_detailed(p, z);
    }
    check_range(p, r)?;
    // |z|² exactly, then ln|z| = ln(|z|²)/2
    let re = Dd::from_f64(z.re);
    let im = Dd::from_f64(z.im);
    let r2 = re * re + im * im;
    let ln_r = r2.ln().mul_f64(0.5);
    let inv_r = (-ln_r).exp();
    let unit = DdComplex::new(re * inv_r, im * inv_r);
    let alpha = Dd::from_f64(p.alpha);
    let beta = Dd::from_f64(p.beta);

    let log_term_dd = |n: usize| -> Dd {
        let arg = beta + alpha.mul_f64(n as f64);
        ln_r.mul_f64(n as f64) - dd::ln_gamma(arg)
    };

    let mut sum = DdComplex::ZERO;
    let mut abs_sum = 0.0;
    let mut phase = DdComplex::new(Dd::ONE, Dd::ZERO);
    let mut log_cur = log_term_dd(0);
    for n in 0..MAX_TERMS {
        let mag = log_cur.exp();
        let term = phase.scale(mag);
        sum = sum + term;
        abs_sum += mag.to_f64();
        phase = phase * unit;

        let log_next = log_term_dd(n + 1);
        let ratio = (log_next - log_cur).to_f64().exp();
        log_cur = log_next;
        if ratio < 0.5 {
            let tail = log_next.to_f64().exp() / (1.0 - ratio);
            let value = C64::new(sum.re.to_f64(), sum.im.to_f64());
            if tail <= 0.25 * p.tol * value.norm() || tail <= 0.01 * DD_EPS * abs_sum {
                let ev = MlEvaluation {
                    value,
                    terms: n + 1,
                    tail_bound: tail,
                    abs_sum,
                    extended: true,
                };
                let err = ev.error_estimate();
                // near a zero of E only an absolute statement is possible
                if err > p.tol * value.norm() && err > ABS_FLOOR {
                    return Err(Error::Range(format!(
                        "E_{{{},{}}}({z}): cancellation leaves error {err:.2e} against \
                         |value| {:.2e}; the argument is outside the series' accuracy envelope",
                        p.alpha,
                        p.beta,
                        value.norm()
                    )));
                }
                return Ok(ev);
            }
        }
    }
    Err(Error::Truncation(format!(
        "E_{{{},{}}}({z}) did not reach tolerance in {MAX_TERMS} terms",
        p.alpha, p.beta
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthSample {
    pub omega: f64,
    pub t: f64,
    pub ratio: f64,
}

/// Fitted constant of the exponential envelope
/// `E_{α,β}(ωt^α) ≤ c (1 + ω^{(1-β)/α})(1 + t^{1-β}) exp(ω^{1/α} t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthEnvelope {
    pub alpha: f64,
    pub beta: f64,
    /// `max(1, sup ratio)` over the sampled grid.
    pub c: f64,
    /// Largest sampled ratio and where it occurred.
    pub sup_ratio: f64,
    pub argmax: (f64, f64),
    pub samples: Vec<GrowthSample>,
    /// Grid points whose ratio could not be evaluated to a finite number.
    pub violations: Vec<(f64, f64)>,
}

impl GrowthEnvelope {
    pub fn is_finite(&self) -> bool {
        self.violations.is_empty() && self.c.is_finite()
    }
}

/// Samples the envelope ratio on `omega_grid × t_grid` in log space.
pub fn check_growth_bound(p: &MlParams, omega_grid: &[f64], t_grid: &[f64]) -> GrowthEnvelope {
    let mut samples = Vec::with_capacity(omega_grid.len() * t_grid.len());
    let mut violations = Vec::new();
    let mut sup = 0.0f64;
    let mut argmax = (f64::NAN, f64::NAN);
    let q = (1.0 - p.beta) / p.alpha;
    for &omega in omega_grid {
        for &t in t_grid {
            let arg = omega * t.powf(p.alpha);
            let ratio = match mittag_leffler(p, C64::new(arg, 0.0)) {
                Ok(v) if v.re > 0.0 => {
                    let log_env = (1.0 + omega.powf(q)).ln()
                        + (1.0 + t.powf(1.0 - p.beta)).ln()
                        + omega.powf(1.0 / p.alpha) * t;
                    (v.re.ln() - log_env).exp()
                }
                Ok(v) if v.re == 0.0 => 0.0,
                _ => f64::NAN,
            };
            if ratio.is_finite() {
                if ratio > sup {
                    sup = ratio;
                    argmax = (omega, t);
                }
            } else {
                violations.push((omega, t));
            }
            samples.push(GrowthSample { omega, t, ratio });
        }
    }
    GrowthEnvelope {
        alpha: p.alpha,
        beta: p.beta,
        c: sup.max(1.0),
        sup_ratio: sup,
        argmax,
        samples,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(4.0).unwrap(), 6.0);
        assert!(rel(gamma(0.5).unwrap(), std::f64::consts::PI.sqrt()) < 1e-14);
        // Γ(0.1) and Γ(50) = 49!
        assert!(rel(gamma(0.1).unwrap(), 9.513_507_698_668_732) < 1e-13);
        assert!(rel(gamma(50.0).unwrap(), 6.082_818_640_342_675e62) < 1e-13);
        assert!(rel(gamma(-0.5).unwrap(), -3.544_907_701_811_032) < 1e-13);
    }

    #[test]
    fn gamma_poles_are_domain_errors() {
        assert!(matches!(gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma(-3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_accuracy_against_extended_path() {
        for i in 0..200 {
            let x = 0.1 + i as f64 * 0.2495;
            let reference = dd::ln_gamma(Dd::from_f64(x)).exp().to_f64();
            assert!(rel(gamma(x).unwrap(), reference) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn g_alpha_cases() {
        assert_eq!(g_alpha(-1.0, 1.5), 0.0);
        assert_eq!(g_alpha(0.0, 1.5), 0.0);
        assert_eq!(g_alpha(7.0, 1.0), 1.0);
        assert_eq!(g_alpha(3.0, 2.0), 3.0);
    }

    #[test]
    fn ml_reduces_to_elementary_functions() {
        let e = mittag_leffler_real(1.0, 1.0, 1.0).unwrap();
        assert!(rel(e, std::f64::consts::E) < 1e-15);
        let c = mittag_leffler_real(2.0, 1.0, -(std::f64::consts::FRAC_PI_2.powi(2))).unwrap();
        assert!(c.abs() < 1e-15);
        let p = MlParams::new(0.7, 1.5).unwrap();
        let zero = mittag_leffler(&p, C64::new(0.0, 0.0)).unwrap();
        assert_eq!(zero.re, 1.0 / gamma(1.5).unwrap());
    }

    #[test]
    fn ml_half_order_matches_erfc_identity() {
        // E_{1/2}(z) = exp(z²) erfc(-z); at z = 1 this is e (1 + erf 1)
        let v = mittag_leffler_real(0.5, 1.0, 1.0).unwrap();
        let expected = std::f64::consts::E * (1.0 + libm::erf(1.0));
        assert!(rel(v, expected) < 1e-14);
        assert!(rel(v, 5.008_980_080_762_283) < 1e-14);
    }

    #[test]
    fn negative_arguments_switch_to_extended_path() {
        let p = MlParams::new(1.0, 1.0).unwrap();
        let ev = mittag_leffler_detailed(&p, C64::new(-5.0, 0.0)).unwrap();
        assert!(ev.extended);
        assert!(rel(ev.value.re, (-5.0f64).exp()) < 1e-14);
        let p2 = MlParams::new(2.0, 1.0).unwrap();
        let ev = mittag_leffler_detailed(&p2, C64::new(-100.0, 0.0)).unwrap();
        assert!((ev.value.re - 10f64.cos()).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_arguments_are_rejected() {
        let p = MlParams::new(1.5, 1.0).unwrap();
        assert!(matches!(
            mittag_leffler(&p, C64::new(250.0, 0.0)),
            Err(Error::Range(_))
        ));
        // cancellation too severe even for double-double
        let p = MlParams::new(0.5, 1.0).unwrap();
        assert!(matches!(
            mittag_leffler(&p, C64::new(-20.0, 0.0)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn complex_argument_matches_exponential() {
        let z = C64::new(0.3, 2.0);
        let p = MlParams::new(1.0, 1.0).unwrap();
        let v = mittag_leffler(&p, z).unwrap();
        assert!((v - z.exp()).norm() / z.exp().norm() < 1e-14);
    }

    #[test]
    fn tail_certificate_bounds_true_remainder() {
        for &(a, b, x) in &[(1.5, 1.0, 3.0), (1.25, 1.5, -2.0), (0.8, 0.5, 4.0)] {
            let p = MlParams::with_tol(a, b, 1e-8).unwrap();
            let coarse = mittag_leffler_detailed(&p, C64::new(x, 0.0)).unwrap();
            let fine = mittag_leffler_extended(&MlParams::with_tol(a, b, 1e-28).unwrap(), C64::new(x, 0.0)).unwrap();
            let true_err = (coarse.value - fine.value).norm();
            assert!(true_err <= coarse.error_estimate() + 1e-15, "{a} {b} {x}");
        }
    }

    #[test]
    fn growth_envelope_at_zero_rate() {
        let p = MlParams::new(1.5, 0.5).unwrap();
        let env = check_growth_bound(&p, &[0.0], &[0.0, 1.0, 2.0]);
        assert!(env.is_finite());
        // ω = 0: ratio = 1/Γ(β) / [(1 + 0)(1 + t^{1-β})]
        let g = 1.0 / gamma(0.5).unwrap();
        for s in &env.samples {
            assert!(rel(s.ratio, g / (1.0 + s.t.powf(0.5))) < 1e-14);
        }
        let p = MlParams::new(1.5, 2.0).unwrap();
        let env = check_growth_bound(&p, &[0.0], &[1.0]);
        assert_eq!(env.samples[0].ratio, 0.0);
    }

    #[test]
    fn growth_envelope_is_finite_on_standard_grid() {
        let omegas: Vec<f64> = (0..=16).map(|i| i as f64 * 0.25).collect();
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        for &a in &[1.1, 1.5, 1.9] {
            for &b in &[a - 1.0, 1.0, a, 2.0 * a - 2.0] {
                let env = check_growth_bound(&MlParams::new(a, b).unwrap(), &omegas, &ts);
                assert!(env.is_finite(), "alpha {a} beta {b}: {:?}", env.violations);
                assert!(env.c >= 1.0 && env.c < 1e3);
            }
        }
    }

    proptest! {
        #[test]
        fn recurrence_in_beta(a in 0.5f64..2.0, b in 0.2f64..3.0, x in -4.0f64..4.0, y in -2.0f64..2.0) {
            let z = C64::new(x, y);
            let lhs = mittag_leffler(&MlParams::new(a, b).unwrap(), z).unwrap();
            let shifted = mittag_leffler(&MlParams::new(a, b + a).unwrap(), z).unwrap();
            let rhs = z * shifted + inv_gamma(b);
            prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
        }

        #[test]
        fn exponential_identity(x in -5.0f64..5.0) {
            let v = mittag_leffler_real(1.0, 1.0, x).unwrap();
            prop_assert!(rel(v, x.exp()) <= 1e-12);
        }

        #[test]
        fn cosine_identity(t in 0.0f64..10.0) {
            let v = mittag_leffler_real(2.0, 1.0, -t * t).unwrap();
            prop_assert!((v - t.cos()).abs() <= 1e-10);
        }

        #[test]
        fn value_at_zero(a in 0.05f64..2.0, b in 0.05f64..5.0) {
            let v = mittag_leffler(&MlParams::new(a, b).unwrap(), C64::new(0.0, 0.0)).unwrap();
            prop_assert_eq!(v.re, inv_gamma(b));
        }
    }
}
