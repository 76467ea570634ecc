//! Space-fractional operators as Fourier multipliers on a periodic grid.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::mesh::{GridFunction, SpatialGrid};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// Left Liouville derivative, symbol `(iξ)^β`.
    Left,
    /// Right Liouville derivative, symbol `(-iξ)^β`.
    Right,
    /// Riesz derivative, symbol `-|ξ|^β`.
    Riesz,
}

/// Symbol of the requested derivative on the grid's frequencies.
///
/// The principal branch `(iξ)^β = |ξ|^β e^{iπβ sgn(ξ)/2}` is used and the
/// zero frequency maps to 0. For the one-sided kinds the Nyquist entry keeps
/// only its real part, so that real data stay real.
pub fn liouville_multiplier(kind: MultiplierKind, beta: f64, grid: &SpatialGrid) -> Result<Vec<C64>> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "space order must lie in (0, 2], got {beta}"
        )));
    }
    if kind == MultiplierKind::Riesz && beta == 1.0 {
        return Err(Error::Singular(
            "the Riesz derivative is undefined at order 1 (cos(βπ/2) = 0)".into(),
        ));
    }
    let nyquist = grid.n_points() / 2;
    let half_turn = 0.5 * std::f64::consts::PI * beta;
    Ok(grid
        .xi()
        .iter()
        .enumerate()
        .map(|(j, &xi)| {
            if xi == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let mag = xi.abs().powf(beta);
            let m = match kind {
                MultiplierKind::Riesz => {
                    if beta == 2.0 {
                        C64::new(-xi * xi, 0.0)
                    } else {
                        C64::new(-mag, 0.0)
                    }
                }
                MultiplierKind::Left => C64::from_polar(mag, half_turn * xi.signum()),
                MultiplierKind::Right => C64::from_polar(mag, -half_turn * xi.signum()),
            };
            if j == nyquist {
                C64::new(m.re, 0.0)
            } else {
                m
            }
        })
        .collect())
}

/// FFT, pointwise multiply, inverse FFT.
pub fn apply_multiplier(m: &[C64], u: &GridFunction) -> Result<GridFunction> {
    let values = apply_multiplier_raw(&u.grid, m, &u.values)?;
    Ok(GridFunction {
        grid: u.grid.clone(),
        values,
    })
}

pub(crate) fn apply_multiplier_raw(grid: &SpatialGrid, m: &[C64], u: &[C64]) -> Result<Vec<C64>> {
    grid.check_len(u.len())?;
    if m.len() != u.len() {
        return Err(Error::Size(format!(
            "multiplier has {} entries, function has {}",
            m.len(),
            u.len()
        )));
    }
    let mut buf = u.to_vec();
    grid.fft(&mut buf);
    for (b, s) in buf.iter_mut().zip(m) {
        *b *= s;
    }
    grid.ifft(&mut buf);
    Ok(buf)
}

/// Symbol of `∂_x` (Nyquist entry zeroed).
pub fn first_derivative_multiplier(grid: &SpatialGrid) -> Vec<C64> {
    let nyquist = grid.n_points() / 2;
    grid.xi()
        .iter()
        .enumerate()
        .map(|(j, &xi)| if j == nyquist { C64::new(0.0, 0.0) } else { C64::new(0.0, xi) })
        .collect()
}

/// Spectral `∂_x u`.
pub fn spectral_derivative(u: &GridFunction) -> GridFunction {
    let m = first_derivative_multiplier(&u.grid);
    apply_multiplier(&m, u).expect("grid function matches its own grid")
}

/// Fractional Sobolev norm with the left Liouville derivative.
///
/// `β ∈ (0,1)`: `(‖u‖² + ‖D^β u‖²)^{1/2}`;
/// `β ∈ (1,2)`: `(‖u‖² + ‖∂_x u‖² + ‖D^β u‖²)^{1/2}`.
pub fn sobolev_norm(u: &GridFunction, beta: f64) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::UnsupportedOrder(
            "the fractional Sobolev norm is defined for orders in (0,1) and (1,2) only".into(),
        ));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::UnsupportedOrder(format!(
            "Sobolev order must lie in (0, 2), got {beta}"
        )));
    }
    let l2 = u.l2_norm();
    let d = apply_multiplier(&liouville_multiplier(MultiplierKind::Left, beta, &u.grid)?, u)?;
    let mut sq = l2 * l2 + d.l2_norm().powi(2);
    if beta > 1.0 {
        sq += spectral_derivative(u).l2_norm().powi(2);
    }
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(8.0, 128).unwrap()
    }

    fn mode(g: &SpatialGrid, k: i64) -> (f64, GridFunction) {
        let xi0 = k as f64 * std::f64::consts::PI / g.half_length();
        (xi0, GridFunction::from_fn(g, |x| C64::from_polar(1.0, xi0 * x)))
    }

    #[test]
    fn riesz_order_two_is_laplacian_symbol() {
        let g = grid();
        let m = liouville_multiplier(MultiplierKind::Riesz, 2.0, &g).unwrap();
        for (s, xi) in m.iter().zip(g.xi()) {
            assert_eq!(*s, C64::new(-xi * xi, 0.0));
        }
    }

    #[test]
    fn riesz_order_one_is_singular() {
        assert!(matches!(
            liouville_multiplier(MultiplierKind::Riesz, 1.0, &grid()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn plane_waves_are_eigenfunctions() {
        let g = grid();
        let (xi0, u) = mode(&g, 5);
        let left = apply_multiplier(&liouville_multiplier(MultiplierKind::Left, 1.5, &g).unwrap(), &u).unwrap();
        let riesz = apply_multiplier(&liouville_multiplier(MultiplierKind::Riesz, 1.5, &g).unwrap(), &u).unwrap();
        let sl = C64::new(0.0, xi0).powf(1.5);
        for j in 0..g.n_points() {
            assert!((left.values[j] - sl * u.values[j]).norm() < 1e-12);
            assert!((riesz.values[j] + xi0.powf(1.5) * u.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn riesz_two_matches_repeated_first_derivative() {
        let g = grid();
        let u = GridFunction::from_real_fn(&g, |x| (-x * x).exp());
        let a = apply_multiplier(&liouville_multiplier(MultiplierKind::Riesz, 2.0, &g).unwrap(), &u).unwrap();
        let b = spectral_derivative(&spectral_derivative(&u));
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn real_inputs_stay_real() {
        let g = grid();
        let u = GridFunction::from_real_fn(&g, |x| (-(x - 1.0).powi(2)).exp() * (1.0 + x));
        for kind in [MultiplierKind::Left, MultiplierKind::Right, MultiplierKind::Riesz] {
            let v = apply_multiplier(&liouville_multiplier(kind, 1.5, &g).unwrap(), &u).unwrap();
            let scale = v.sup_norm();
            assert!(v.values.iter().all(|z| z.im.abs() <= 1e-12 * scale));
        }
    }

    #[test]
    fn trivial_multipliers() {
        let g = grid();
        let u = GridFunction::from_real_fn(&g, |x| x.cos());
        let zero = apply_multiplier(&vec![C64::new(0.0, 0.0); 128], &u).unwrap();
        assert!(zero.sup_norm() == 0.0);
        let one = apply_multiplier(&vec![C64::new(1.0, 0.0); 128], &u).unwrap();
        assert!(one.values.iter().zip(&u.values).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(matches!(apply_multiplier(&[C64::new(1.0, 0.0)], &u), Err(Error::Size(_))));
    }

    #[test]
    fn sobolev_norm_of_single_mode() {
        let g = grid();
        let (xi0, u) = mode(&g, 3);
        let n = sobolev_norm(&u, 0.5).unwrap();
        let expected = (2.0 * g.half_length() * (1.0 + xi0)).sqrt();
        assert!((n - expected).abs() < 1e-12 * expected);
        let n = sobolev_norm(&u, 1.5).unwrap();
        let expected = (2.0 * g.half_length() * (1.0 + xi0 * xi0 + xi0.powi(3))).sqrt();
        assert!((n - expected).abs() < 1e-12 * expected);
        assert!(matches!(sobolev_norm(&u, 1.0), Err(Error::UnsupportedOrder(_))));
        assert_eq!(sobolev_norm(&GridFunction::zeros(&g), 0.5).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn riesz_symbol_is_real_even_nonpositive(beta in 1.01f64..2.0) {
            let g = SpatialGrid::new(5.0, 64).unwrap();
            let m = liouville_multiplier(MultiplierKind::Riesz, beta, &g).unwrap();
            for j in 1..32 {
                prop_assert!(m[j].im == 0.0 && m[j].re <= 0.0);
                prop_assert_eq!(m[j], m[64 - j]);
            }
        }

        #[test]
        fn left_symbol_is_hermitian(beta in 0.1f64..2.0) {
            let g = SpatialGrid::new(5.0, 64).unwrap();
            let m = liouville_multiplier(MultiplierKind::Left, beta, &g).unwrap();
            let r = liouville_multiplier(MultiplierKind::Right, beta, &g).unwrap();
            for j in 1..32 {
                prop_assert!((m[j] - m[64 - j].conj()).norm() <= 1e-12 * m[j].norm());
                prop_assert!((r[j] - m[j].conj()).norm() <= 1e-12 * m[j].norm());
            }
        }

        #[test]
        fn multiplier_action_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.2f64..2.0) {
            let g = SpatialGrid::new(6.0, 64).unwrap();
            let m = liouville_multiplier(MultiplierKind::Left, 1.3, &g).unwrap();
            let u = GridFunction::from_real_fn(&g, |x| (-s * x * x).exp());
            let v = GridFunction::from_fn(&g, |x| C64::new(x.sin(), (-x.abs()).exp()));
            let comb = GridFunction::from_fn(&g, |x| a * (-s * x * x).exp() + b * C64::new(x.sin(), (-x.abs()).exp()));
            let lhs = apply_multiplier(&m, &comb).unwrap();
            let mu = apply_multiplier(&m, &u).unwrap();
            let mv = apply_multiplier(&m, &v).unwrap();
            let scale = lhs.sup_norm().max(1.0);
            for j in 0..64 {
                prop_assert!((lhs.values[j] - (mu.values[j] * a + mv.values[j] * b)).norm() <= 1e-12 * scale);
            }
        }
    }
}
