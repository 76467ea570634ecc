//! Browser bindings: Mittag-Leffler curves, mollified symbols and a small
//! wave solve, all returning flat `Float64Array`s.

use fracwave::duhamel::solve;
use fracwave::fractional::SpatialGrid;
use fracwave::harness::{parse_config, ScenarioSetup};
use fracwave::regularization::{Mollifier, MollifierShape, OperatorKind};
use fracwave::special::mittag_leffler_real;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `E_{α,β}(x)` on `n` points of `[x_min, x_max]`, interleaved `[x, E, ...]`.
/// Points outside the accuracy envelope come back as NaN.
#[wasm_bindgen]
pub fn ml_curve(alpha: f64, beta: f64, x_min: f64, x_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if n < 2 || !(x_max > x_min) {
        return Err(js_err("need n >= 2 and x_max > x_min"));
    }
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = x_min + (x_max - x_min) * i as f64 / (n - 1) as f64;
        out.push(x);
        out.push(mittag_leffler_real(alpha, beta, x).unwrap_or(f64::NAN));
    }
    Ok(out)
}

/// `φ̂_h(ξ) · m(ξ)` for `ξ ≥ 0` as `[ξ, Re φ̂, Re(φ̂ m), Im(φ̂ m), ...]`,
/// with `m` the symbol of `kind` (`second_derivative`, `liouville_left`,
/// `riesz`).
#[wasm_bindgen]
pub fn mollified_symbol(
    shape: &str,
    kind: &str,
    beta: f64,
    h: f64,
    half_length: f64,
    n_points: usize,
) -> Result<Vec<f64>, JsError> {
    let shape = match shape {
        "bump" => MollifierShape::Bump,
        "truncated_gaussian" => MollifierShape::TruncatedGaussian,
        other => return Err(js_err(format!("unknown mollifier '{other}'"))),
    };
    let kind = match kind {
        "second_derivative" => OperatorKind::SecondDerivative,
        "liouville_left" => OperatorKind::LiouvilleLeft,
        "riesz" => OperatorKind::Riesz,
        other => return Err(js_err(format!("unknown operator '{other}'"))),
    };
    let grid = SpatialGrid::new(half_length, n_points).map_err(js_err)?;
    let moll = Mollifier::new(shape, h, &grid).map_err(js_err)?;
    let m = kind.symbol(beta, &grid).map_err(js_err)?;
    let mut out = Vec::with_capacity(2 * n_points);
    for j in 0..=n_points / 2 {
        let s = moll.symbol[j] * m[j];
        out.extend([grid.xi()[j], moll.symbol[j].re, s.re, s.im]);
    }
    Ok(out)
}

/// Result of [`solve_wave`]: `frames` is row-major `n_nodes × n_points`
/// holding `Re U`.
#[wasm_bindgen]
pub struct WaveSolution {
    frames: Vec<f64>,
    xs: Vec<f64>,
    n_nodes: usize,
    norm: f64,
    cap: f64,
    h: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl WaveSolution {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> Vec<f64> {
        self.frames.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    #[wasm_bindgen(getter)]
    pub fn norm(&self) -> f64 {
        self.norm
    }
    #[wasm_bindgen(getter)]
    pub fn cap(&self) -> f64 {
        self.cap
    }
    #[wasm_bindgen(getter)]
    pub fn h(&self) -> f64 {
        self.h
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Time-fractional wave run on `λ = 1 + 0.5 sech x`, Gaussian data, at
/// `ε = 2^{-k}`. `f` is an expression in `u` (e.g. `0.1*sin(u)`); `sigma`
/// adds seeded forcing noise.
#[wasm_bindgen]
pub fn solve_wave(alpha: f64, k: u32, f: &str, sigma: f64, seed: u64, t_max: f64) -> Result<WaveSolution, JsError> {
    let text = format!(
        "seed = {seed}\n[orders]\nalpha = {alpha}\n[schedule]\neps = {eps:e}\n\
         [grid]\nhalf_length = 16.0\nn_points = 256\n[time]\nt_max = {t_max}\nn_steps = 48\n\
         [nonlinearity]\nf = {f:?}\n[noise]\nsigma = {sigma}\n",
        eps = 2f64.powi(-(k as i32)),
    );
    let cfg = parse_config(&text).map_err(js_err)?;
    let setup = ScenarioSetup::new(&cfg).map_err(js_err)?;
    let built = setup.problem(cfg.schedule.eps, 0).map_err(js_err)?;
    let report = solve(&built.problem, &setup.solve_options()).map_err(js_err)?;
    let rec = built.record();
    Ok(WaveSolution {
        frames: report.trajectory.frames.iter().flatten().map(|v| v.re).collect(),
        xs: setup.grid.xs(),
        n_nodes: report.trajectory.frames.len(),
        norm: rec.norm,
        cap: rec.cap,
        h: rec.h,
        iterations: report.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_reproduces_cosine() {
        let c = ml_curve(2.0, 1.0, -9.0, 0.0, 10).unwrap();
        for p in c.chunks(2) {
            assert!((p[1] - (-p[0]).sqrt().cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn symbol_starts_at_one() {
        let s = mollified_symbol("bump", "second_derivative", 2.0, 2.0, 16.0, 256).unwrap();
        assert_eq!(s.len(), 4 * 129);
        assert!((s[1] - 1.0).abs() < 1e-12);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn wave_runs() {
        let w = solve_wave(1.5, 8, "0.1*sin(u)", 0.05, 1, 1.0).unwrap();
        assert_eq!(w.frames.len(), 49 * 256);
        assert!(w.norm <= w.cap);
        assert!(w.frames.iter().all(|v| v.is_finite()));
    }
}
