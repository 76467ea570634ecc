//! Ratio diagnostics for the fractional chain and product rules.
//!
//! Each case compares `‖D_+^α(·)‖_{L²}` with the right-hand side of the
//! corresponding estimate without its unspecified constant and reports the
//! ratio. Nothing is asserted about the size of the ratio.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::mesh::GridFunction;
use super::space::{apply_multiplier, liouville_multiplier, sobolev_norm, spectral_derivative, MultiplierKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityCase {
    /// `‖D^α f(u)‖ ≤ C ‖f'(u)‖_∞ ‖D^α u‖`, `0 < α < 1`.
    Chain01,
    /// `‖D^α(fg)‖ ≤ C‖f‖_∞‖D^α g‖ + C‖D^α f‖‖g‖_∞`, `0 < α < 1`.
    Leibniz01,
    /// `‖D^α f(u)‖ ≤ C‖f'(u)‖_∞‖D^α u‖ + C‖D^{α-1} f'(u)‖_∞ ‖u‖_{H^α}`, `1 < α < 2`.
    Chain12,
    /// Four-term product estimate, `1 < α < 2`.
    Leibniz12,
}

/// Inputs: a nonlinearity with its derivative acting on `u`, or a pair `(f, g)`.
pub enum InequalityInput<'a> {
    Chain {
        f: &'a dyn Fn(C64) -> C64,
        df: &'a dyn Fn(C64) -> C64,
        u: &'a GridFunction,
    },
    Product {
        f: &'a GridFunction,
        g: &'a GridFunction,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub case: InequalityCase,
    pub order: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Right side vanishes while the left side does not.
    pub violation: bool,
}

fn d_norm(u: &GridFunction, order: f64) -> Result<f64> {
    let m = liouville_multiplier(MultiplierKind::Left, order, &u.grid)?;
    Ok(apply_multiplier(&m, u)?.l2_norm())
}

fn d_sup(u: &GridFunction, order: f64) -> Result<f64> {
    let m = liouville_multiplier(MultiplierKind::Left, order, &u.grid)?;
    Ok(apply_multiplier(&m, u)?.sup_norm())
}

pub fn inequality_diagnostic(
    case: InequalityCase,
    input: InequalityInput<'_>,
    order: f64,
) -> Result<InequalityReport> {
    let low = matches!(case, InequalityCase::Chain01 | InequalityCase::Leibniz01);
    let valid = if low {
        order > 0.0 && order < 1.0
    } else {
        order > 1.0 && order < 2.0
    };
    if !valid {
        return Err(Error::InvalidParameter(format!(
            "order {order} is outside the range of {case:?}"
        )));
    }
    let (lhs, rhs) = match (case, input) {
        (InequalityCase::Chain01 | InequalityCase::Chain12, InequalityInput::Chain { f, df, u }) => {
            let fu = u.map(f);
            let dfu = u.map(df);
            let lhs = d_norm(&fu, order)?;
            let mut rhs = dfu.sup_norm() * d_norm(u, order)?;
            if case == InequalityCase::Chain12 {
                rhs += d_sup(&dfu, order - 1.0)? * sobolev_norm(u, order)?;
            }
            (lhs, rhs)
        }
        (InequalityCase::Leibniz01 | InequalityCase::Leibniz12, InequalityInput::Product { f, g }) => {
            if f.grid != g.grid {
                return Err(Error::Size("f and g live on different grids".into()));
            }
            let fg = GridFunction {
                grid: f.grid.clone(),
                values: f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect(),
            };
            let lhs = d_norm(&fg, order)?;
            let mut rhs = f.sup_norm() * d_norm(g, order)? + d_norm(f, order)? * g.sup_norm();
            if case == InequalityCase::Leibniz12 {
                rhs += spectral_derivative(f).sup_norm() * d_norm(g, order - 1.0)?
                    + d_norm(f, order - 1.0)? * spectral_derivative(g).sup_norm();
            }
            (lhs, rhs)
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{case:?} expects {} input",
                if matches!(case, InequalityCase::Chain01 | InequalityCase::Chain12) {
                    "a chain-rule"
                } else {
                    "a product"
                }
            )))
        }
    };
    let tiny = 1e-300;
    let (ratio, violation) = if rhs > tiny {
        (lhs / rhs, false)
    } else if lhs > 1e-13 {
        (f64::INFINITY, true)
    } else {
        (0.0, false)
    };
    Ok(InequalityReport {
        case,
        order,
        lhs,
        rhs,
        ratio,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::SpatialGrid;

    fn bump(g: &SpatialGrid, c: f64, w: f64) -> GridFunction {
        GridFunction::from_real_fn(g, |x| (-((x - c) / w).powi(2)).exp())
    }

    #[test]
    fn zero_inputs_give_zero_ratio() {
        let g = SpatialGrid::new(10.0, 128).unwrap();
        let z = GridFunction::zeros(&g);
        let b = bump(&g, 0.0, 1.0);
        let r = inequality_diagnostic(InequalityCase::Leibniz01, InequalityInput::Product { f: &z, g: &b }, 0.5).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(!r.violation);
        let zero = |_: C64| C64::new(0.0, 0.0);
        let r = inequality_diagnostic(
            InequalityCase::Chain01,
            InequalityInput::Chain { f: &zero, df: &zero, u: &b },
            0.5,
        )
        .unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn product_ratio_is_stable_under_refinement() {
        let ratios: Vec<f64> = [256, 512, 1024]
            .iter()
            .map(|&n| {
                let g = SpatialGrid::new(12.0, n).unwrap();
                let f = bump(&g, -0.5, 1.0);
                let h = bump(&g, 0.7, 1.5);
                inequality_diagnostic(InequalityCase::Leibniz01, InequalityInput::Product { f: &f, g: &h }, 0.5)
                    .unwrap()
                    .ratio
            })
            .collect();
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!((ratios[1] - ratios[2]).abs() < 1e-3 * ratios[2]);
    }

    #[test]
    fn chain_ratio_with_tanh() {
        let g = SpatialGrid::new(12.0, 512).unwrap();
        let u = bump(&g, 0.0, 1.0);
        let f = |z: C64| z.tanh();
        let df = |z: C64| {
            let c = z.cosh();
            1.0 / (c * c)
        };
        let r = inequality_diagnostic(InequalityCase::Chain12, InequalityInput::Chain { f: &f, df: &df, u: &u }, 1.5)
            .unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        let r = inequality_diagnostic(
            InequalityCase::Leibniz12,
            InequalityInput::Product { f: &u, g: &bump(&g, 1.0, 2.0) },
            1.5,
        )
        .unwrap();
        assert!(r.ratio.is_finite());
    }

    #[test]
    fn mismatched_input_is_rejected() {
        let g = SpatialGrid::new(4.0, 64).unwrap();
        let u = bump(&g, 0.0, 1.0);
        assert!(inequality_diagnostic(InequalityCase::Chain01, InequalityInput::Product { f: &u, g: &u }, 0.5).is_err());
        assert!(inequality_diagnostic(InequalityCase::Leibniz12, InequalityInput::Product { f: &u, g: &u }, 0.5).is_err());
    }
}
