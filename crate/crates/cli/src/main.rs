//! `fracwave`: command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracwave::error::Error;
use fracwave::harness::validation::{run_criterion, SuiteReport, Tolerances};
use fracwave::harness::{load_config, noise_dump, parse_config, run_scenario, sweep_epsilon, RunConfig};
use fracwave::special::{mittag_leffler_detailed, MlParams};
use num_complex::Complex64 as C64;

#[derive(Parser)]
#[command(name = "fracwave", version, about = "Fractional wave solver with mollified operators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML); defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (must be absent or empty)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress and summaries
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write a run directory
    Run,
    /// Association and moderateness tables over the epsilon ladder
    SweepEpsilon,
    /// Evaluate E_{alpha,beta}(z)
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// RE or RE,IM
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the acceptance suite
    Validate {
        /// Only these criteria (1-15)
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Write the mollified forcing noise as CSV
    NoiseDump,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::NormGate(_) => 3,
        Error::Divergence(_) => 4,
        _ => 1,
    }
}

fn config(g: &Global) -> Result<RunConfig, Error> {
    let mut c = match &g.config {
        Some(p) => load_config(p)?,
        None => parse_config("")?,
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

fn parse_z(s: &str) -> Result<C64, Error> {
    let bad = || Error::Config(format!("--z expects RE or RE,IM, got '{s}'"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad()));
    let re = parts.next().ok_or_else(bad)??;
    let im = parts.next().transpose()?.unwrap_or(0.0);
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn ml(alpha: f64, beta: f64, z: &str, tol: Option<f64>) -> Result<String, Error> {
    let z = parse_z(z)?;
    let p = match tol {
        Some(t) => MlParams::with_tol(alpha, beta, t),
        None => MlParams::new(alpha, beta),
    }
    .map_err(|e| Error::Config(e.to_string()))?;
    let v = mittag_leffler_detailed(&p, z)?.value;
    Ok(if z.im == 0.0 && v.im == 0.0 {
        format!("{:.14e}", v.re)
    } else {
        format!("{:.14e},{:.14e}", v.re, v.im)
    })
}

fn validate(g: &Global, only: &[usize]) -> Result<bool, Error> {
    if let Some(&bad) = only.iter().find(|&&i| !(1..=15).contains(&i)) {
        return Err(Error::Config(format!("criteria are numbered 1 to 15, got {bad}")));
    }
    let ids: Vec<usize> = if only.is_empty() { (1..=15).collect() } else { only.to_vec() };
    let tol = Tolerances::default();
    let mut criteria = Vec::new();
    for id in ids {
        let r = run_criterion(id, &tol);
        if !g.quiet {
            println!("{}", r.line());
        }
        criteria.push(r);
    }
    let passed = criteria.iter().all(|c| c.passed);
    let report = SuiteReport { criteria, passed, tolerances: tol };
    if let Some(dir) = &g.out {
        fracwave::harness::validation::write_report(&report, dir)?;
    }
    Ok(passed)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let g = &cli.global;
    let say = |s: String| {
        if !g.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::Run => {
            let (rec, dir) = run_scenario(&config(g)?, g.out.as_deref())?;
            let detail = match &rec.solver {
                Some(s) => format!("{} Picard sweeps, sup norm {:.6e}", s.iterations, s.sup_norm),
                None => format!("ensemble of {}", rec.noise.members),
            };
            say(format!(
                "eps {:e}, h {:.4}, |A| {:.4e} (cap {:.4e}); {detail}; wrote {}",
                rec.operator.eps,
                rec.operator.h,
                rec.operator.norm,
                rec.operator.cap,
                dir.display()
            ));
        }
        Command::SweepEpsilon => {
            let (rec, dir) = sweep_epsilon(&config(g)?, g.out.as_deref())?;
            for (row, m) in rec.association.rows.iter().zip(&rec.moderateness.rows) {
                say(format!(
                    "eps {:.3e}  h {:.4}  assoc {:.4e}  sup|U| {}",
                    row.eps,
                    row.h,
                    row.errors[0],
                    m.u_norm.map_or_else(|| m.failure.clone().unwrap_or_default(), |v| format!("{v:.4e}"))
                ));
            }
            let n = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            say(format!(
                "association strictly decreasing: {}; fitted N: U {}, dU/dt {}, Caputo {}; wrote {}",
                rec.association.strictly_decreasing[0],
                n(rec.moderateness.n_u),
                n(rec.moderateness.n_dt),
                n(rec.moderateness.n_caputo),
                dir.display()
            ));
        }
        Command::Ml { alpha, beta, z, tol } => println!("{}", ml(*alpha, *beta, z, *tol)?),
        Command::Validate { only } => {
            if !validate(g, only)? {
                return Ok(ExitCode::from(3));
            }
        }
        Command::NoiseDump => {
            let (rec, dir) = noise_dump(&config(g)?, g.out.as_deref())?;
            say(format!(
                "variance {:.4e} (predicted {:.4e}); wrote {}",
                rec.sample_variance,
                rec.predicted_variance,
                dir.display()
            ));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fracwave: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_parsing() {
        assert_eq!(parse_z("1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_z("-1,2").unwrap(), C64::new(-1.0, 2.0));
        assert!(parse_z("1,2,3").is_err());
        assert!(parse_z("x").is_err());
    }

    #[test]
    fn ml_formats_fifteen_digits() {
        assert_eq!(ml(1.0, 1.0, "0", None).unwrap(), "1.00000000000000e0");
        let e: f64 = ml(1.0, 1.0, "1", None).unwrap().parse().unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-14);
        assert!(matches!(ml(3.0, 1.0, "1", None), Err(Error::Config(_))));
    }
}
