//! Turns a [`RunConfig`] into grids, operators and Cauchy problems.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::config::{LambdaSpec, RunConfig, Scenario};
use crate::duhamel::{CauchyProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::fractional::{GridFunction, SpatialGrid, TimeMesh};
use crate::regularization::{
    build_operator, build_regularized, norm_gate, EpsilonSchedule, NormGateReport, RegularizedOperator,
    ScheduleValue,
};
use crate::solution::SolutionOperatorEvaluator;
use crate::stochastic::{stochastic_initial_data, white_noise_representative, NoiseRepresentative, NoiseSpec};

/// Everything that does not depend on ε or the ensemble member.
#[derive(Clone, Debug)]
pub struct ScenarioSetup {
    pub config: RunConfig,
    pub grid: SpatialGrid,
    pub mesh: TimeMesh,
    pub schedule: EpsilonSchedule,
    /// Unsmoothed coefficient samples.
    pub lambda_raw: Vec<f64>,
    pub u0: GridFunction,
    pub u1: Vec<C64>,
}

/// One assembled problem plus the pieces worth recording.

pub struct BuiltProblem {
    pub problem: CauchyProblem,
    pub operator: Arc<RegularizedOperator>,
    pub schedule_value: ScheduleValue,
    pub gate: NormGateReport,
    pub forcing: Option<NoiseRepresentative>,
    pub initial_noise: Option<NoiseSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorRecord {
    pub eps: f64,
    pub h: f64,
    pub clamped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub norm: f64,
    pub cap: f64,
    pub lambda_h2_norm: f64,
}

impl BuiltProblem {
    pub fn record(&self) -> OperatorRecord {
        let row = &self.gate.rows[0];
        OperatorRecord {
            eps: self.schedule_value.eps,
            h: self.schedule_value.h,
            clamped: self.schedule_value.clamped,
            warning: self.schedule_value.warning.clone(),
            norm: row.norm,
            cap: row.cap,
            lambda_h2_norm: self.operator.lambda_h2_norm,
        }
    }
}

impl ScenarioSetup {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let grid = SpatialGrid::new(config.half_length, config.n_points)?;
        let mesh = TimeMesh::new(config.t_max, config.n_steps)?;
        let s = &config.schedule;
        let eps = EpsilonSchedule::dyadic(s.eps_k_min..=s.eps_k_max);
        let mut schedule = EpsilonSchedule::new(eps, config.alpha, s.scenario)?;
        schedule.kappa = s.kappa;
        schedule.h_min = s.h_min;
        schedule.coefficient_ratio = s.coefficient_ratio;
        schedule.kappa_cap = s.kappa_cap;
        schedule.validate()?;
        let lambda_raw: Vec<f64> = match &config.lambda {
            LambdaSpec::Expression(e) => grid.xs().iter().map(|&x| e.eval(x)).collect(),
            LambdaSpec::Profile(p) => grid.xs().iter().map(|&x| p.eval(x)).collect(),
            LambdaSpec::Samples { values, .. } => values.clone(),
        };
        if let Some(bad) = lambda_raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("lambda is not finite at x = {}", grid.x(bad))));
        }
        let eval_profile = |e: &crate::expr::Expr, what: &str| -> Result<GridFunction> {
            let g = GridFunction::from_real_fn(&grid, |x| e.eval(x));
            if let Some(bad) = g.values.iter().position(|v| !v.re.is_finite()) {
                return Err(Error::Config(format!("{what} is not finite at x = {}", grid.x(bad))));
            }
            Ok(g)
        };
        let u0 = eval_profile(&config.u0, "u0")?;
        let u1 = eval_profile(&config.u1, "u1")?.values;
        Ok(ScenarioSetup { config: config.clone(), grid, mesh, schedule, lambda_raw, u0, u1 })
    }

    /// The ε values of a sweep, coarse to fine.
    pub fn sweep_eps(&self) -> &[f64] {
        &self.schedule.eps
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.config.tol,
            max_iter: self.config.max_iter,
            representation: self.config.representation,
            ..SolveOptions::default()
        }
    }

    pub fn operator(&self, eps: f64) -> Result<RegularizedOperator> {
        let c = &self.config;
        build_regularized(&self.schedule, eps, c.kind, c.beta, &self.lambda_raw, c.mollifier, &self.grid)
    }

    /// The unmollified operator `λ · D` used for association.
    pub fn exact_operator(&self) -> Result<RegularizedOperator> {
        let c = &self.config;
        build_operator(c.kind, c.beta, &self.lambda_raw, None, &self.grid)
    }

    /// Operators for every ε of the sweep with the norm gate over them.
    pub fn gated_operators(&self) -> Result<(Vec<RegularizedOperator>, NormGateReport)> {
        let ops = self.sweep_eps().iter().map(|&e| self.operator(e)).collect::<Result<Vec<_>>>()?;
        let gate = norm_gate(&self.schedule, &ops)?;
        Ok((ops, gate))
    }

    /// Assembles the problem at `eps` for one ensemble member; a failed
    /// norm gate aborts with [`Error::NormGate`].
    pub fn problem(&self, eps: f64, member: u32) -> Result<BuiltProblem> {
        let op = self.operator(eps)?;
        self.problem_with(op, eps, member)
    }

    pub fn problem_with(&self, op: RegularizedOperator, eps: f64, member: u32) -> Result<BuiltProblem> {
        let c = &self.config;
        let schedule_value = self.schedule.h(eps)?;
        let gate = norm_gate(&self.schedule, std::slice::from_ref(&op))?;
        gate.check()?;
        let h = schedule_value.h;
        let norm = op.operator_norm_estimate().value;
        let operator = Arc::new(op);
        let ev = SolutionOperatorEvaluator::new(c.alpha, operator.clone(), norm)?;

        let noise_spec = |sigma: f64| {
            let mut s = NoiseSpec::new(sigma, c.seed).with_member(member);
            s.space_width = c.noise.space_width;
            s.time_width = c.noise.time_width;
            s
        };
        let initial_noise = (c.noise.initial_sigma > 0.0).then(|| noise_spec(c.noise.initial_sigma));
        let q = match &initial_noise {
            Some(spec) => stochastic_initial_data(&self.u0, spec, h)?,
            None => self.u0.clone(),
        };
        let forcing = if c.noise.sigma > 0.0 {
            Some(white_noise_representative(&noise_spec(c.noise.sigma), eps, h, &self.grid, &self.mesh)?)
        } else {
            None
        };
        let mut p = CauchyProblem::new(Arc::new(ev), q.values, self.mesh.clone())?
            .with_nonlinearity(c.nonlinearity.clone())
            .with_norm_weight(self.grid.dx());
        if self.u1.iter().any(|v| *v != C64::new(0.0, 0.0)) {
            p = p.with_velocity(self.u1.clone())?;
        }
        if let Some(f) = &forcing {
            p = p.with_forcing(f.frames.clone())?;
        }
        Ok(BuiltProblem { problem: p, operator, schedule_value, gate, forcing, initial_noise })
    }

    pub fn scenario_label(&self) -> &'static str {
        match self.config.scenario {
            Scenario::TimeFractional => "time_fractional",
            Scenario::TimeSpaceFractional => "time_space_fractional",
            Scenario::Custom => "custom",
        }
    }
}
