//! `rmfg`: config-driven driver for the risk-averse mean field game solver.

mod quantize;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rmfg_core::config::RunConfig;
use rmfg_core::model::ModelSpec;
use rmfg_core::nplayer::{belief_gap_experiment, deltaell_gap_experiment, fournier_guillin_rate};
use rmfg_core::risk::DiscreteNoise;
use rmfg_core::solver::{dp_oracle, fixed_point, MfgSolution};
use rmfg_core::{io, Error};
use serde_json::json;
use sha2::{Digest, Sha256};

const EXIT_ASSUMPTION: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_MISSING_ARTIFACTS: u8 = 4;
const EXIT_CAP: u8 = 5;

#[derive(Parser)]
#[command(name = "rmfg", version, about = "Risk-averse mean field games on a 1-D grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    config: PathBuf,
    /// Output (and, for `simulate`, solve) directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the seed of the command's section.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config schema and the standing assumptions.
    Validate(Common),
    /// Solve the mean field game and write its artifacts.
    Solve(Common),
    /// N-player experiments against a previous solve in `--out`.
    Simulate(Common),
    /// Empirical-measure convergence rate.
    Rates(Common),
    /// Compare the grid value against exact scenario-tree costs.
    Oracle(Common),
    /// Print a moment-matched discrete noise law as JSON.
    Quantize(QuantizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    Uniform,
}

#[derive(Args)]
struct QuantizeArgs {
    family: Family,
    /// Number of atoms.
    #[arg(long, short)]
    k: usize,
    /// Mean (gaussian) or lower end (uniform).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    a: f64,
    /// Standard deviation (gaussian) or upper end (uniform).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    b: f64,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: impl Into<anyhow::Error>) -> Self {
        Self { code, err: err.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_SCHEMA,
            Error::TreeCap { .. } => EXIT_CAP,
            _ => EXIT_ASSUMPTION,
        };
        Self::new(code, e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Self { code: EXIT_ASSUMPTION, err }
    }
}

type Outcome = Result<u8, Failure>;

struct Loaded {
    cfg: RunConfig,
    model: ModelSpec,
    hash: String,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Failure::new(EXIT_SCHEMA, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Failure::new(EXIT_SCHEMA, e))?;
    let (cfg, model) = RunConfig::parse(&text)?;
    let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { cfg, model, hash })
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| Failure::new(EXIT_ASSUMPTION, e))?;
    }
    Ok(())
}

fn validate(c: &Common) -> Outcome {
    let l = load(&c.config)?;
    let checks = l.model.assumption_report(5, c.seed.unwrap_or(0));
    let mut ok = true;
    for chk in &checks {
        let tag = if !chk.ok {
            "FAIL"
        } else if chk.warning {
            "warn"
        } else {
            "ok"
        };
        println!("{tag:4} {}: {}", chk.name, chk.detail);
        ok &= chk.ok;
    }
    Ok(if ok { 0 } else { EXIT_ASSUMPTION })
}

fn solve_summary(l: &Loaded, sol: &MfgSolution) -> serde_json::Value {
    json!({
        "command": "solve",
        "config_sha256": l.hash,
        "seeds": { "distance_seed": l.model.numerics.distance_seed },
        "converged": sol.converged,
        "iterations": sol.iterations,
        "final_residual": sol.final_residual(),
        "value": sol.value(),
        "damping": l.cfg.solve.damping,
        "tol": l.cfg.solve.tol,
        "max_iter": l.cfg.solve.max_iter,
        "policy_lipschitz": sol.policy.lipschitz_constant(),
        "u_slopes": sol.u.iter().map(|u| [u.slope_left(), u.slope_right()]).collect::<Vec<_>>(),
    })
}

fn solve(c: &Common) -> Outcome {
    let l = load(&c.config)?;
    let sol = fixed_point(&l.model, &l.cfg.solve.options())?;
    io::write_solution(&c.out, &sol)?;
    io::write_json(&c.out.join("summary.json"), &solve_summary(&l, &sol))?;
    println!(
        "converged={} iterations={} residual={:.3e} value={:.9}",
        sol.converged,
        sol.iterations,
        sol.final_residual(),
        sol.value()
    );
    Ok(if sol.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn simulate(c: &Common) -> Outcome {
    let l = load(&c.config)?;
    let mut sim = l.cfg.simulate.clone().ok_or_else(|| Failure::new(EXIT_SCHEMA, anyhow!("config has no simulate section")))?;
    if let Some(s) = c.seed {
        sim.seed = s;
    }
    let missing = |e: Error| Failure::new(EXIT_MISSING_ARTIFACTS, anyhow!("solve artifacts in {}: {e}", c.out.display()));
    let policy = io::read_policy(&c.out, l.model.grid, l.model.horizon).map_err(missing)?;
    let b_bar = io::read_belief(&c.out, l.model.horizon).map_err(missing)?;
    let belief = belief_gap_experiment(&l.model, &policy, &b_bar, &sim)?;
    let dell = deltaell_gap_experiment(&l.model, &policy, &b_bar, &sim)?;
    io::write_gap_report(&c.out.join("belief_gap.csv"), &belief)?;
    io::write_gap_report(&c.out.join("deltaell_gap.csv"), &dell)?;
    io::write_json(
        &c.out.join("simulate.json"),
        &json!({
            "command": "simulate",
            "config_sha256": l.hash,
            "seeds": { "master": sim.seed, "distance_seed": l.model.numerics.distance_seed },
            "reps": sim.reps,
            "predicted_slope": sim.predicted_slope(1),
            "belief_gap": belief.fit,
            "deltaell_gap": dell.fit,
        }),
    )?;
    println!("belief gap slope {:?}, delta-l slope {:?}", belief.slope(), dell.slope());
    Ok(0)
}

fn rates(c: &Common) -> Outcome {
    let l = load(&c.config)?;
    let r = l.cfg.rates.as_ref().ok_or_else(|| Failure::new(EXIT_SCHEMA, anyhow!("config has no rates section")))?;
    let mut sim = r.sim();
    if let Some(s) = c.seed {
        sim.seed = s;
    }
    let law = r.law(&l.model)?;
    let rep = fournier_guillin_rate(&law, r.dim, &sim)?;
    std::fs::create_dir_all(&c.out).map_err(Error::from)?;
    io::write_gap_report(&c.out.join("rates.csv"), &rep)?;
    io::write_json(
        &c.out.join("rates.json"),
        &json!({
            "command": "rates",
            "config_sha256": l.hash,
            "seeds": { "master": sim.seed },
            "dim": r.dim,
            "reps": sim.reps,
            "predicted_slope": sim.predicted_slope(r.dim),
            "fit": rep.fit,
        }),
    )?;
    println!("slope {:?}", rep.slope());
    Ok(0)
}

fn oracle(c: &Common) -> Outcome {
    let l = load(&c.config)?;
    let mut opts = l.cfg.oracle.clone();
    if let Some(s) = c.seed {
        opts.seed = s;
    }
    let sol = fixed_point(&l.model, &l.cfg.solve.options())?;
    let report = dp_oracle(&l.model, &sol.belief, &opts)?;
    std::fs::create_dir_all(&c.out).map_err(Error::from)?;
    io::write_json(
        &c.out.join("oracle.json"),
        &json!({
            "command": "oracle",
            "config_sha256": l.hash,
            "seeds": { "perturbation": opts.seed, "distance_seed": l.model.numerics.distance_seed },
            "fixed_point_residual": sol.final_residual(),
            "report": report,
        }),
    )?;
    println!(
        "{} gap={:.3e} worst_margin={:.3e}",
        if report.passed { "pass" } else { "FAIL" },
        report.gap,
        report.worst_margin
    );
    Ok(if report.passed { 0 } else { EXIT_ASSUMPTION })
}

fn quantize(q: &QuantizeArgs) -> Outcome {
    if q.k == 0 {
        return Err(Failure::new(EXIT_SCHEMA, anyhow!("need at least one atom")));
    }
    let atoms = match q.family {
        Family::Gaussian => quantize::gaussian(q.k, q.a, q.b),
        Family::Uniform => quantize::uniform(q.k, q.a, q.b),
    };
    let noise = DiscreteNoise::new(atoms)?;
    println!("{}", serde_json::to_string_pretty(&noise).map_err(anyhow::Error::from)?);
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Validate(c) | Command::Solve(c) | Command::Simulate(c) | Command::Rates(c) | Command::Oracle(c) => {
            set_threads(c.threads)?
        }
        Command::Quantize(_) => {}
    }
    match &cli.command {
        Command::Validate(c) => validate(c),
        Command::Solve(c) => solve(c),
        Command::Simulate(c) => simulate(c),
        Command::Rates(c) => rates(c),
        Command::Oracle(c) => oracle(c),
        Command::Quantize(q) => quantize(q),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
