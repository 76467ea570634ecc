//! Seeded, mollified space-time white noise and stochastic initial data.
//!
//! Every sample is a pure function of `(seed, member, stream, space index,
//! time index)`: the counter-based Philox4x32-10 generator maps that tuple
//! to 128 random bits, and a Box-Muller transform (via `libm`, so the bits
//! do not depend on the platform's math library) turns them into one
//! standard normal. Mollification uses direct sums, not FFTs, for the same
//! reason.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::duhamel::{solve, CauchyProblem, SolveOptions, SolverSummary};
use crate::error::{Error, Result};
use crate::fractional::{GridFunction, SpatialGrid, TimeMesh};
use crate::par::par_map;
use crate::regularization::{normalization_constant, Mollifier, MollifierShape};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Stream tags (third counter word).
pub const STREAM_FORCING: u32 = 1;
pub const STREAM_INITIAL: u32 = 2;
/// Offset applied to signed time indices so negative cells get distinct counters.
const TIME_OFFSET: i64 = 1 << 31;

fn open_unit(hi: u32, lo: u32) -> f64 {
    let bits = (u64::from(hi) << 21) | (u64::from(lo) >> 11);
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal for counter `[j, k, stream, member]` under `seed`.
pub fn standard_normal(seed: u64, ctr: [u32; 4]) -> f64 {
    let r = philox4x32_10(ctr, [seed as u32, (seed >> 32) as u32]);
    let u1 = open_unit(r[0], r[1]);
    let u2 = open_unit(r[2], r[3]);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
}

/// Noise intensity, mollification widths (kernel radii) and seed path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    /// Spatial kernel radius; defaults to `1/h_ε`.
    pub space_width: Option<f64>,
    /// Temporal kernel radius; defaults to `1/h_ε`.
    pub time_width: Option<f64>,
    pub seed: u64,
    pub member: u32,
    pub shape: MollifierShape,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        NoiseSpec {
            sigma,
            space_width: None,
            time_width: None,
            seed,
            member: 0,
            shape: MollifierShape::Bump,
        }
    }

    pub fn with_member(mut self, member: u32) -> Self {
        self.member = member;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise intensity must be finite and >= 0, got {}", self.sigma)));
        }
        for w in [self.space_width, self.time_width].into_iter().flatten() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("mollification widths must be positive, got {w}")));
            }
        }
        Ok(())
    }

    /// `(space, time)` radii for schedule scale `h`.
    pub fn widths(&self, h: f64) -> (f64, f64) {
        (self.space_width.unwrap_or(1.0 / h), self.time_width.unwrap_or(1.0 / h))
    }

    pub fn seed_path(&self, stream: u32) -> String {
        format!("seed={}/member={}/stream={}", self.seed, self.member, stream)
    }
}

/// Mollified noise frames on the mesh nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRepresentative {
    #[serde(skip)]
    pub frames: Vec<Vec<C64>>,
    pub spec: NoiseSpec,
    pub eps: f64,
    pub space_width: f64,
    pub time_width: f64,
    pub seed_path: String,
}

/// Nonzero taps `(offset, weight)` of a mass-one kernel on spacing `d`.
fn taps(shape: MollifierShape, radius: f64, d: f64) -> Vec<(i64, f64)> {
    let c = normalization_constant(shape);
    let m = (radius / d).ceil() as i64;
    let mut t: Vec<(i64, f64)> = (-m..=m)
        .filter_map(|l| {
            let x = l as f64 * d / radius;
            if x.abs() >= 1.0 {
                return None;
            }
            let v = match shape {
                MollifierShape::Bump => (-1.0 / (1.0 - x * x)).exp(),
                MollifierShape::TruncatedGaussian => (-4.5 * x * x).exp(),
            };
            Some((l, c * v / radius))
        })
        .collect();
    let mass: f64 = d * t.iter().map(|p| p.1).sum::<f64>();
    t.iter_mut().for_each(|p| p.1 /= mass);
    t
}

fn space_taps(spec: &NoiseSpec, radius: f64, grid: &SpatialGrid) -> Result<Vec<(i64, f64)>> {
    // same resolvability rules as the operator mollifier
    Mollifier::new(spec.shape, 1.0 / radius, grid)?;
    Ok(taps(spec.shape, radius, grid.dx()))
}

fn time_taps(spec: &NoiseSpec, radius: f64, mesh: &TimeMesh) -> Result<Vec<(i64, f64)>> {
    if 2.0 * radius < 4.0 * mesh.dt() {
        return Err(Error::Resolution(format!(
            "temporal kernel diameter {:.4e} is below four time steps ({:.4e})",
            2.0 * radius,
            4.0 * mesh.dt()
        )));
    }
    Ok(taps(spec.shape, radius, mesh.dt()))
}

/// Periodic direct convolution of a real line with `taps` (spacing `d`).
fn convolve_periodic(line: &[f64], taps: &[(i64, f64)], d: f64) -> Vec<f64> {
    let n = line.len() as i64;
    (0..n)
        .map(|i| {
            taps.iter()
                .map(|&(l, w)| w * d * line[(i - l).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}

/// `P_ε`: iid normals scaled by `σ/√(Δx Δt)` on space-time cells, mollified
/// in `x` (periodically) and in `t` (with cells before and after the window).
pub fn white_noise_representative(
    spec: &NoiseSpec,
    eps: f64,
    h: f64,
    grid: &SpatialGrid,
    mesh: &TimeMesh,
) -> Result<NoiseRepresentative> {
    spec.validate()?;
    let (ws, wt) = spec.widths(h);
    let n = grid.n_points();
    let zero_frames = || vec![vec![C64::new(0.0, 0.0); n]; mesh.n_nodes()];
    let rep = |frames| NoiseRepresentative {
        frames,
        spec: spec.clone(),
        eps,
        space_width: ws,
        time_width: wt,
        seed_path: spec.seed_path(STREAM_FORCING),
    };
    let sx = space_taps(spec, ws, grid)?;
    let st = time_taps(spec, wt, mesh)?;
    if spec.sigma == 0.0 {
        return Ok(rep(zero_frames()));
    }
    let (dx, dt) = (grid.dx(), mesh.dt());
    let scale = spec.sigma / (dx * dt).sqrt();
    let reach = st.iter().map(|p| p.0.abs()).max().unwrap_or(0);
    let n_nodes = mesh.n_nodes() as i64;
    // spatially mollified noise for every time cell the temporal kernel touches
    let first = -reach;
    let rows: Vec<Vec<f64>> = par_map((n_nodes + 2 * reach) as usize, |r| {
        let k = first + r as i64;
        let kw = (k + TIME_OFFSET) as u32;
        let line: Vec<f64> = (0..n)
            .map(|j| scale * standard_normal(spec.seed, [j as u32, kw, STREAM_FORCING, spec.member]))
            .collect();
        convolve_periodic(&line, &sx, dx)
    });
    let frames = par_map(mesh.n_nodes(), |k| {
        let mut acc = vec![0.0f64; n];
        for &(l, w) in &st {
            let row = &rows[(k as i64 - l - first) as usize];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += w * dt * v;
            }
        }
        acc.into_iter().map(|v| C64::new(v, 0.0)).collect()
    });
    Ok(rep(frames))
}

/// `Σ_l (w_l)² d`: the discrete squared L² norm of a kernel.
fn kernel_energy(t: &[(i64, f64)], d: f64) -> f64 {
    t.iter().map(|p| p.1 * p.1).sum::<f64>() * d
}

/// Pointwise variance `σ² ‖φ‖² ‖ψ‖²` of the discretely mollified field.
pub fn noise_variance(spec: &NoiseSpec, h: f64, grid: &SpatialGrid, mesh: &TimeMesh) -> Result<f64> {
    let (ws, wt) = spec.widths(h);
    let sx = space_taps(spec, ws, grid)?;
    let st = time_taps(spec, wt, mesh)?;
    Ok(spec.sigma * spec.sigma * kernel_energy(&sx, grid.dx()) * kernel_energy(&st, mesh.dt()))
}

/// `Q_ε = u₀ + (σ/√Δx) N * φ` with spatial kernel radius from `spec`.
pub fn stochastic_initial_data(u0: &GridFunction, spec: &NoiseSpec, h: f64) -> Result<GridFunction> {
    spec.validate()?;
    let grid = &u0.grid;
    let (ws, _) = spec.widths(h);
    let sx = space_taps(spec, ws, grid)?;
    if spec.sigma == 0.0 {
        return Ok(u0.clone());
    }
    let dx = grid.dx();
    let scale = spec.sigma / dx.sqrt();
    let line: Vec<f64> = (0..grid.n_points())
        .map(|j| scale * standard_normal(spec.seed, [j as u32, 0, STREAM_INITIAL, spec.member]))
        .collect();
    let noise = convolve_periodic(&line, &sx, dx);
    GridFunction::new(
        grid,
        u0.values.iter().zip(noise).map(|(u, v)| u + v).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub members: usize,
    #[serde(skip)]
    pub mean: Vec<Vec<C64>>,
    /// Unbiased `E|U - mean|²` per node (0 for a single member).
    #[serde(skip)]
    pub variance: Vec<Vec<f64>>,
}

impl EnsembleStats {
    /// Standard error of the mean at one node.
    pub fn std_error(&self, k: usize, j: usize) -> f64 {
        (self.variance[k][j] / self.members as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberOutcome {
    pub member: u32,
    pub seed_path: String,
    pub summary: Option<SolverSummary>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub stats: Option<EnsembleStats>,
    pub members: Vec<MemberOutcome>,
    pub failed: usize,
}

/// Solves `build(master_seed, member)` for each member in parallel and
/// reduces the trajectories in member order.
pub fn ensemble_run(
    n_members: u32,
    master_seed: u64,
    build: &(dyn Fn(u64, u32) -> Result<CauchyProblem> + Sync),
    opts: &SolveOptions,
) -> Result<EnsembleResult> {
    if n_members == 0 {
        return Err(Error::InvalidParameter("an ensemble needs at least one member".into()));
    }
    let runs = par_map(n_members as usize, |i| {
        let m = i as u32;
        let out = build(master_seed, m).and_then(|p| {
            let r = solve(&p, opts)?;
            Ok((r.summary(&p), r.trajectory.frames))
        });
        (m, out)
    });
    let mut members = Vec::with_capacity(runs.len());
    let mut ok: Vec<Vec<Vec<C64>>> = Vec::new();
    for (m, out) in runs {
        let seed_path = format!("seed={master_seed}/member={m}");
        match out {
            Ok((summary, frames)) => {
                members.push(MemberOutcome { member: m, seed_path, summary: Some(summary), failure: None });
                ok.push(frames);
            }
            Err(e) => members.push(MemberOutcome { member: m, seed_path, summary: None, failure: Some(e.to_string()) }),
        }
    }
    let failed = members.len() - ok.len();
    let stats = (!ok.is_empty()).then(|| ensemble_stats(&ok));
    Ok(EnsembleResult { stats, members, failed })
}

/// Mean and unbiased variance, summed in member order.
pub fn ensemble_stats(runs: &[Vec<Vec<C64>>]) -> EnsembleStats {
    let n = runs.len();
    let mut mean = runs[0].clone();
    for r in &runs[1..] {
        for (mk, rk) in mean.iter_mut().zip(r) {
            for (a, b) in mk.iter_mut().zip(rk) {
                *a += b;
            }
        }
    }
    let inv = 1.0 / n as f64;
    if n > 1 {
        mean.iter_mut().flatten().for_each(|v| *v *= inv);
    }
    let mut variance: Vec<Vec<f64>> = mean.iter().map(|f| vec![0.0; f.len()]).collect();
    if n > 1 {
        for r in runs {
            for ((vk, mk), rk) in variance.iter_mut().zip(&mean).zip(r) {
                for ((v, m), x) in vk.iter_mut().zip(mk).zip(rk) {
                    *v += (x - m).norm_sqr();
                }
            }
        }
        let d = 1.0 / (n - 1) as f64;
        variance.iter_mut().flatten().for_each(|v| *v *= d);
    }
    EnsembleStats { members: n, mean, variance }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn philox_known_answers() {
        assert_eq!(philox4x32_10([0; 4], [0; 2]), [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]);
        assert_eq!(philox4x32_10([u32::MAX; 4], [u32::MAX; 2]), [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]);
        assert_eq!(
            philox4x32_10([0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344], [0xa4093822, 0x299f31d0]),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn normals_have_unit_moments() {
        let n = 200_000;
        let s: Vec<f64> = (0..n).map(|j| standard_normal(42, [j, 0, 9, 0])).collect();
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    fn setup() -> (SpatialGrid, TimeMesh) {
        (SpatialGrid::new(16.0, 256).unwrap(), TimeMesh::new(1.0, 64).unwrap())
    }

    #[test]
    fn zero_intensity_and_determinism() {
        let (g, m) = setup();
        let z = white_noise_representative(&NoiseSpec::new(0.0, 7), 0.01, 2.0, &g, &m).unwrap();
        assert!(z.frames.iter().flatten().all(|v| *v == C64::new(0.0, 0.0)));
        let spec = NoiseSpec::new(0.3, 7);
        let a = white_noise_representative(&spec, 0.01, 2.0, &g, &m).unwrap();
        let b = white_noise_representative(&spec, 0.01, 2.0, &g, &m).unwrap();
        assert_eq!(a.frames, b.frames);
        let u0 = GridFunction::from_real_fn(&g, |x| (-x * x).exp());
        assert_eq!(stochastic_initial_data(&u0, &NoiseSpec::new(0.0, 1), 2.0).unwrap(), u0);
    }

    #[test]
    fn field_variance_matches_kernel_energy() {
        let (g, m) = setup();
        let h = 2.0;
        let mut samples = Vec::new();
        for member in 0..40 {
            let spec = NoiseSpec::new(0.5, 11).with_member(member);
            let f = white_noise_representative(&spec, 0.01, h, &g, &m).unwrap();
            // nodes two kernel diameters apart are independent
            for k in (0..m.n_nodes()).step_by(64) {
                for j in (0..g.n_points()).step_by(16) {
                    samples.push(f.frames[k][j].re);
                }
            }
        }
        let n = samples.len() as f64;
        let var = samples.iter().map(|v| v * v).sum::<f64>() / n;
        let expected = noise_variance(&NoiseSpec::new(0.5, 11), h, &g, &m).unwrap();
        assert!((var - expected).abs() <= 3.0 * expected * (2.0 / n).sqrt(), "{var} {expected}");
    }

    #[test]
    fn independent_members_are_uncorrelated() {
        let (g, m) = setup();
        let a = white_noise_representative(&NoiseSpec::new(1.0, 3).with_member(0), 0.01, 2.0, &g, &m).unwrap();
        let b = white_noise_representative(&NoiseSpec::new(1.0, 3).with_member(1), 0.01, 2.0, &g, &m).unwrap();
        let (xa, xb): (Vec<f64>, Vec<f64>) = a
            .frames
            .iter()
            .step_by(64)
            .zip(b.frames.iter().step_by(64))
            .flat_map(|(p, q)| p.iter().step_by(16).zip(q.iter().step_by(16)).map(|(u, v)| (u.re, v.re)))
            .unzip();
        let n = xa.len() as f64;
        let dot: f64 = xa.iter().zip(&xb).map(|(u, v)| u * v).sum();
        let na: f64 = xa.iter().map(|u| u * u).sum::<f64>().sqrt();
        let nb: f64 = xb.iter().map(|u| u * u).sum::<f64>().sqrt();
        assert!((dot / (na * nb)).abs() <= 3.0 / n.sqrt());
    }

    #[test]
    fn unresolvable_width_is_rejected() {
        let (g, m) = setup();
        let spec = NoiseSpec { time_width: Some(0.01), ..NoiseSpec::new(1.0, 0) };
        assert!(matches!(white_noise_representative(&spec, 0.01, 2.0, &g, &m), Err(Error::Resolution(_))));
    }

    #[test]
    fn single_member_statistics() {
        let run = vec![vec![vec![C64::new(1.5, -0.25), C64::new(0.1, 0.0)]; 3]];
        let s = ensemble_stats(&run);
        assert_eq!(s.mean, run[0]);
        assert!(s.variance.iter().flatten().all(|v| *v == 0.0));
    }
}
