use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform time mesh `t_k = k Δt`, `k = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeMesh {
    t_max: f64,
    n_steps: usize,
}

impl TimeMesh {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive and finite, got {t_max}"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "a time mesh needs at least 2 steps, got {n_steps}"
            )));
        }
        Ok(TimeMesh { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_max
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.node(k)).collect()
    }

    /// Same horizon with twice as many steps.
    pub fn refined(&self) -> TimeMesh {
        TimeMesh {
            t_max: self.t_max,
            n_steps: 2 * self.n_steps,
        }
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_nodes() {
            return Err(Error::Size(format!(
                "signal has {len} samples but the mesh has {} nodes",
                self.n_nodes()
            )));
        }
        Ok(())
    }
}

/// Periodic grid on `[-L, L)` with `n` points and FFT-ordered angular
/// frequencies. FFT plans are shared, so clones are cheap.
#[derive(Clone)]
pub struct SpatialGrid {
    half_length: f64,
    n: usize,
    xi: Arc<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("half_length", &self.half_length)
            .field("n_points", &self.n)
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.half_length == other.half_length && self.n == other.n
    }
}

impl SpatialGrid {
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "half_length must be positive, got {half_length}"
            )));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        let dk = std::f64::consts::PI / half_length;
        let xi = (0..n_points)
            .map(|j| {
                let k = if j < n_points / 2 {
                    j as i64
                } else {
                    j as i64 - n_points as i64
                };
                k as f64 * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(SpatialGrid {
            half_length,
            n: n_points,
            xi: Arc::new(xi),
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular frequencies in FFT order; index `n/2` is the Nyquist entry.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Unnormalized forward DFT in place.
    pub fn fft(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// Inverse DFT in place, normalized by `1/n`.
    pub fn ifft(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Size(format!(
                "vector has {len} entries but the grid has {} points",
                self.n
            )));
        }
        Ok(())
    }
}

/// Complex samples on a [`SpatialGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: SpatialGrid,
    pub values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: &SpatialGrid, values: Vec<C64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid function has non-finite entries".into(),
            ));
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: vec![C64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(f64) -> C64) -> Self {
        GridFunction {
            grid: grid.clone(),
            values: grid.xs().into_iter().map(f).collect(),
        }
    }

    pub fn from_real_fn(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, self.grid.dx())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Discrete `L²` norm with `dx` weighting.
pub fn l2_norm(v: &[C64], dx: f64) -> f64 {
    (dx * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

pub fn sup_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Euclidean norm.
pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One state vector per mesh node.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub mesh: TimeMesh,
    pub frames: Vec<Vec<C64>>,
}

impl Trajectory {
    pub fn new(mesh: TimeMesh, frames: Vec<Vec<C64>>) -> Result<Self> {
        mesh.check_len(frames.len())?;
        if let Some(first) = frames.first() {
            if frames.iter().any(|f| f.len() != first.len()) {
                return Err(Error::Size("trajectory frames differ in length".into()));
            }
        }
        Ok(Trajectory { mesh, frames })
    }

    pub fn zeros(mesh: TimeMesh, dim: usize) -> Self {
        Trajectory {
            mesh,
            frames: vec![vec![C64::new(0.0, 0.0); dim]; mesh.n_nodes()],
        }
    }

    pub fn dim(&self) -> usize {
        self.frames.first().map_or(0, Vec::len)
    }

    /// Largest Euclidean distance between matching frames.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}
