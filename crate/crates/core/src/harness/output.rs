//! Run directories: config copy, metadata JSON, CSV artifacts and a
//! manifest. Every file is produced in memory first, so a failed run
//! leaves nothing behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::scenario::{OperatorRecord, ScenarioSetup};
use crate::duhamel::{moderateness_scan, solve, ModerationReport, NonlinearitySummary, SolverSummary};
use crate::error::{Error, Result};
use crate::fractional::{GridFunction, SpatialGrid, TimeMesh};
use crate::regularization::{association_diagnostic, AssociationTable, NormGateReport, ScheduleScenario};
use crate::stochastic::{ensemble_run, noise_variance, MemberOutcome, NoiseRepresentative, NoiseSpec};

pub const CONFIG_FILE: &str = "config.toml";
pub const METADATA_FILE: &str = "metadata.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ASSOCIATION_FILE: &str = "association.csv";
pub const MODERATENESS_FILE: &str = "moderateness.csv";
pub const NOISE_FILE: &str = "noise.csv";

/// Sobolev order of the norms recorded by the ε-sweep.
pub const SWEEP_SOBOLEV_ORDER: f64 = 0.5;

/// Formats a float with 17 significant digits.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,x,re_u,im_u`, rows ordered by time then space.
pub fn trajectory_csv(mesh: &TimeMesh, grid: &SpatialGrid, frames: &[Vec<C64>]) -> String {
    let xs: Vec<String> = grid.xs().into_iter().map(sci).collect();
    let mut s = String::with_capacity(frames.len() * xs.len() * 100 + 16);
    s.push_str("t,x,re_u,im_u\n");
    for (k, frame) in frames.iter().enumerate() {
        let t = sci(mesh.node(k));
        for (x, u) in xs.iter().zip(frame) {
            let _ = writeln!(s, "{t},{x},{},{}", sci(u.re), sci(u.im));
        }
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

/// Files destined for one run directory.
#[derive(Default)]
pub(crate) struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub(crate) fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub(crate) fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            files: self
                .files
                .iter()
                .map(|(n, b)| ManifestEntry { name: n.clone(), bytes: b.len(), sha256: sha256_hex(b) })
                .collect(),
        }
    }

    /// Writes into `dir`, which must be absent or empty.
    pub(crate) fn write(mut self, dir: &Path) -> Result<Manifest> {
        if dir.exists() {
            if std::fs::read_dir(dir)?.next().is_some() {
                return Err(Error::Io(format!("output directory {} is not empty", dir.display())));
            }
        } else {
            std::fs::create_dir_all(dir)?;
        }
        let manifest = self.manifest();
        self.add_json(MANIFEST_FILE, &manifest)?;
        for (name, bytes) in &self.files {
            if let Err(e) = std::fs::write(dir.join(name), bytes) {
                for (n, _) in &self.files {
                    let _ = std::fs::remove_file(dir.join(n));
                }
                return Err(e.into());
            }
        }
        Ok(manifest)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleRecord {
    pub scenario: ScheduleScenario,
    pub alpha: f64,
    pub kappa: f64,
    pub h_min: f64,
    pub coefficient_ratio: f64,
    pub kappa_cap: f64,
    pub mollifier: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseRecord {
    pub forcing: Option<NoiseRepresentative>,
    pub initial: Option<NoiseSpec>,
    pub members: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleRecord {
    pub members: Vec<MemberOutcome>,
    pub failed: usize,
}

/// Metadata of a `run`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
    pub operator_kind: crate::regularization::OperatorKind,
    pub grid: GridRecord,
    pub schedule: ScheduleRecord,
    pub operator: OperatorRecord,
    pub gate: NormGateReport,
    pub nonlinearity: NonlinearitySummary,
    pub noise: NoiseRecord,
    /// Single-member solve; `None` for ensembles.
    pub solver: Option<SolverSummary>,
    /// Ensemble runs store the member mean as the trajectory.
    pub ensemble: Option<EnsembleRecord>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRecord {
    pub half_length: f64,
    pub n_points: usize,
    pub t_max: f64,
    pub n_steps: usize,
}

fn common(setup: &ScenarioSetup) -> (String, GridRecord, ScheduleRecord) {
    let c = &setup.config;
    let grid = GridRecord { half_length: c.half_length, n_points: c.n_points, t_max: c.t_max, n_steps: c.n_steps };
    let s = &setup.schedule;
    let schedule = ScheduleRecord {
        scenario: s.scenario,
        alpha: s.alpha,
        kappa: s.kappa,
        h_min: s.h_min,
        coefficient_ratio: s.coefficient_ratio,
        kappa_cap: s.kappa_cap,
        mollifier: format!("{:?}", c.mollifier).to_lowercase(),
    };
    (sha256_hex(c.source.as_bytes()), grid, schedule)
}

fn resolve_out(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set [output] dir".into()))
}

/// Solves the configured problem at `schedule.eps` and writes the run
/// directory. Several noise members produce the ensemble mean.
pub fn run_scenario(config: &RunConfig, out: Option<&Path>) -> Result<(RunRecord, PathBuf)> {
    let dir = resolve_out(config, out)?;
    let setup = ScenarioSetup::new(config)?;
    let eps = config.schedule.eps;
    let opts = setup.solve_options();
    let built = setup.problem(eps, 0)?;
    let (frames, solver, ensemble) = if config.noise.members <= 1 {
        let report = solve(&built.problem, &opts)?;
        let summary = report.summary(&built.problem);
        (report.trajectory.frames, Some(summary), None)
    } else {
        let op = built.operator.as_ref().clone();
        let build = |_seed: u64, m: u32| setup.problem_with(op.clone(), eps, m).map(|b| b.problem);
        let res = ensemble_run(config.noise.members, config.seed, &build, &opts)?;
        let Some(stats) = res.stats else {
            let why = res.members.iter().find_map(|m| m.failure.clone()).unwrap_or_default();
            return Err(Error::Divergence(format!("every ensemble member failed; first: {why}")));
        };
        (stats.mean, None, Some(EnsembleRecord { members: res.members, failed: res.failed }))
    };
    let (config_hash, grid, schedule) = common(&setup);
    let mut bundle = Bundle::default();
    bundle.add(CONFIG_FILE, config.source.as_bytes());
    bundle.add(TRAJECTORY_FILE, trajectory_csv(&setup.mesh, &setup.grid, &frames));
    let record = RunRecord {
        config_hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: setup.scenario_label().to_string(),
        seed: config.seed,
        alpha: config.alpha,
        beta: config.beta,
        operator_kind: config.kind,
        grid,
        schedule,
        operator: built.record(),
        gate: built.gate.clone(),
        nonlinearity: config.nonlinearity.summary(),
        noise: NoiseRecord {
            forcing: built.forcing.clone(),
            initial: built.initial_noise.clone(),
            members: config.noise.members,
        },
        solver,
        ensemble,
        files: vec![CONFIG_FILE.into(), TRAJECTORY_FILE.into(), METADATA_FILE.into(), MANIFEST_FILE.into()],
    };
    bundle.add_json(METADATA_FILE, &record)?;
    bundle.write(&dir)?;
    Ok((record, dir))
}

/// Metadata of a `sweep-epsilon` run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub config_hash: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub grid: GridRecord,
    pub schedule: ScheduleRecord,
    pub gate: NormGateReport,
    pub association: AssociationTable,
    pub association_probe: String,
    pub moderateness: ModerationReport,
    pub files: Vec<String>,
}

/// Smooth, slowly varying probe for the association table.
pub fn association_probe(grid: &SpatialGrid) -> GridFunction {
    GridFunction::from_real_fn(grid, |x| (-x * x / 36.0).exp())
}

/// Association and moderateness tables over the configured ε ladder; the
/// norm gate runs first and aborts the sweep when any ε violates it.
pub fn sweep_epsilon(config: &RunConfig, out: Option<&Path>) -> Result<(SweepRecord, PathBuf)> {
    let dir = resolve_out(config, out)?;
    let setup = ScenarioSetup::new(config)?;
    if setup.sweep_eps().len() < 4 {
        return Err(Error::Config("an epsilon sweep needs at least four levels (eps_k_min..=eps_k_max)".into()));
    }
    let (ops, gate) = setup.gated_operators()?;
    gate.check()?;
    let exact = setup.exact_operator()?;
    let association = association_diagnostic(&exact, &ops, &[association_probe(&setup.grid)])?;
    let opts = setup.solve_options();
    let template = |eps: f64| {
        let i = setup.sweep_eps().iter().position(|&e| e == eps).expect("epsilon from the sweep");
        setup.problem_with(ops[i].clone(), eps, 0).map(|b| b.problem)
    };
    let moderateness = moderateness_scan(&template, setup.sweep_eps(), &setup.grid, SWEEP_SOBOLEV_ORDER, &opts);

    let mut assoc = String::from("eps,h,error\n");
    for r in &association.rows {
        let _ = writeln!(assoc, "{},{},{}", sci(r.eps), sci(r.h), sci(r.errors[0]));
    }
    let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
    let mut moder = String::from("eps,u_norm,dt_norm,caputo_norm,failure\n");
    for r in &moderateness.rows {
        let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(moder, "{},{},{},{},{failure}", sci(r.eps), opt(r.u_norm), opt(r.dt_norm), opt(r.caputo_norm));
    }
    let (config_hash, grid, schedule) = common(&setup);
    let mut bundle = Bundle::default();
    bundle.add(CONFIG_FILE, config.source.as_bytes());
    bundle.add(ASSOCIATION_FILE, assoc);
    bundle.add(MODERATENESS_FILE, moder);
    let record = SweepRecord {
        config_hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: setup.scenario_label().to_string(),
        seed: config.seed,
        grid,
        schedule,
        gate,
        association,
        association_probe: "exp(-x^2/36)".into(),
        moderateness,
        files: vec![
            CONFIG_FILE.into(),
            ASSOCIATION_FILE.into(),
            MODERATENESS_FILE.into(),
            METADATA_FILE.into(),
            MANIFEST_FILE.into(),
        ],
    };
    bundle.add_json(METADATA_FILE, &record)?;
    bundle.write(&dir)?;
    Ok((record, dir))
}

/// Metadata of a `noise-dump`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseDumpRecord {
    pub config_hash: String,
    pub version: String,
    pub eps: f64,
    pub h: f64,
    pub representative: NoiseRepresentative,
    /// Pointwise variance predicted from the discrete kernels.
    pub predicted_variance: f64,
    /// Sample variance over all space-time nodes.
    pub sample_variance: f64,
    pub files: Vec<String>,
}

/// Writes the forcing representative of member 0 at `schedule.eps` as
/// `t,x,value`.
pub fn noise_dump(config: &RunConfig, out: Option<&Path>) -> Result<(NoiseDumpRecord, PathBuf)> {
    let dir = resolve_out(config, out)?;
    let setup = ScenarioSetup::new(config)?;
    let eps = config.schedule.eps;
    let h = setup.schedule.h(eps)?.h;
    let mut spec = NoiseSpec::new(config.noise.sigma, config.seed);
    spec.space_width = config.noise.space_width;
    spec.time_width = config.noise.time_width;
    let rep = crate::stochastic::white_noise_representative(&spec, eps, h, &setup.grid, &setup.mesh)?;
    let predicted_variance = noise_variance(&spec, h, &setup.grid, &setup.mesh)?;
    let count = (rep.frames.len() * setup.grid.n_points()) as f64;
    let sample_variance = rep.frames.iter().flatten().map(|v| v.re * v.re).sum::<f64>() / count;

    let xs: Vec<String> = setup.grid.xs().into_iter().map(sci).collect();
    let mut csv = String::from("t,x,value\n");
    for (k, frame) in rep.frames.iter().enumerate() {
        let t = sci(setup.mesh.node(k));
        for (x, v) in xs.iter().zip(frame) {
            let _ = writeln!(csv, "{t},{x},{}", sci(v.re));
        }
    }
    let mut bundle = Bundle::default();
    bundle.add(CONFIG_FILE, config.source.as_bytes());
    bundle.add(NOISE_FILE, csv);
    let record = NoiseDumpRecord {
        config_hash: sha256_hex(config.source.as_bytes()),
        version: env!("CARGO_PKG_VERSION").to_string(),
        eps,
        h,
        representative: rep,
        predicted_variance,
        sample_variance,
        files: vec![CONFIG_FILE.into(), NOISE_FILE.into(), METADATA_FILE.into(), MANIFEST_FILE.into()],
    };
    bundle.add_json(METADATA_FILE, &record)?;
    bundle.write(&dir)?;
    Ok((record, dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    const SMALL: &str = "[grid]\nhalf_length = 8.0\nn_points = 128\n[time]\nn_steps = 16\n";

    #[test]
    fn csv_layout() {
        let grid = SpatialGrid::new(1.0, 8).unwrap();
        let mesh = TimeMesh::new(1.0, 8).unwrap();
        let frames = vec![vec![C64::new(1.0, -0.5); 8]; 9];
        let csv = trajectory_csv(&mesh, &grid, &frames);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,re_u,im_u");
        assert_eq!(lines.len(), 1 + 9 * 8);
        assert_eq!(lines[1], "0.0000000000000000e0,-1.0000000000000000e0,1.0000000000000000e0,-5.0000000000000000e-1");
        assert!(lines[9].starts_with("1.2500000000000000e-1,-1.0"));
    }

    #[test]
    fn run_directory_contents() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = parse_config(SMALL).unwrap();
        let (rec, _) = run_scenario(&cfg, Some(&out)).unwrap();
        let mut names: Vec<String> =
            std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
        names.sort();
        let mut expected = rec.files.clone();
        expected.sort();
        assert_eq!(names, expected);
        assert_eq!(std::fs::read_to_string(out.join(CONFIG_FILE)).unwrap(), SMALL);
        // a second run refuses to mix into a populated directory
        assert!(matches!(run_scenario(&cfg, Some(&out)), Err(Error::Io(_))));
    }

    #[test]
    fn gate_failure_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = parse_config(&format!("{SMALL}[schedule]\nkappa_cap = 0.01\n")).unwrap();
        assert!(matches!(run_scenario(&cfg, Some(&out)), Err(Error::NormGate(_))));
        assert!(!out.exists());
    }
}
