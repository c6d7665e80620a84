use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use mfgkit_sim::mkv::{
    load_mkv_scenario, ou_oracle, parse_mkv_scenario, rate_study, simulate_particles,
    InitialLaw, MkvScenario, OuMoments, ParticleConfig, RawMkvScenario, RateStudyConfig,
};
use mfgkit_sim::fit::Estimate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::positive;
use crate::output::{num, Csv};
use crate::{CliError, Completion, Context};

const OU: &str = r#"
model = "ou"
[parameters]
a = 1.0
b = 0.0
s = 1.4142135623730951
[initial]
law = "gaussian"
mean = 1.0
variance = 0.25
[simulation]
n = 2000
step = 1e-3
end = 5.0
"#;

const PURE_DRIFT: &str = r#"
model = "pure-drift"
[parameters]
c = 1.0
[initial]
law = "gaussian"
mean = 0.0
variance = 1.0
[simulation]
n = 1000
step = 1e-2
end = 1.0
"#;

const CUSTOM_TABLE: &str = r#"
model = "custom-table"
[parameters]
knots = [-2.0, 0.0, 2.0]
level = [1.0, 0.0, -1.0]
slope = [0.5, 0.5, 0.5]
sigma = [0.3, 0.3, 0.3]
[initial]
law = "gaussian"
mean = 0.0
variance = 1.0
[simulation]
n = 1000
step = 1e-2
end = 1.0
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinModel {
    Ou,
    PureDrift,
    CustomTable,
}

impl BuiltinModel {
    fn text(self) -> &'static str {
        match self {
            BuiltinModel::Ou => OU,
            BuiltinModel::PureDrift => PURE_DRIFT,
            BuiltinModel::CustomTable => CUSTOM_TABLE,
        }
    }
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MkvCommand {
    /// Simulate the particle system and write position snapshots.
    Run(MkvRunArgs),
    /// Distance to the limit law as a function of n and of the step.
    Rate(MkvRateArgs),
}

impl MkvCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            MkvCommand::Run(_) => "run",
            MkvCommand::Rate(_) => "rate",
        }
    }

    pub(crate) fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        let model = match self {
            MkvCommand::Run(a) => &mut a.model,
            MkvCommand::Rate(a) => &mut a.model,
        };
        model.scenario.as_mut().into_iter().collect()
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MkvModelArgs {
    /// Particle scenario file.
    #[arg(long, conflicts_with = "model")]
    pub scenario: Option<PathBuf>,
    /// Built-in model used when no scenario file is given.
    #[arg(long, value_enum)]
    pub model: Option<BuiltinModel>,
    /// Horizon; overrides the scenario's `simulation.end`.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MkvRunArgs {
    #[command(flatten)]
    pub model: MkvModelArgs,
    /// Number of particles; overrides `simulation.n`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Euler step; overrides `simulation.step`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Keep every k-th step in the snapshot file; only the initial and final
    /// positions without it.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MkvRateArgs {
    #[command(flatten)]
    pub model: MkvModelArgs,
    /// Comma-separated particle counts, run at the smallest step.
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
    pub ns: Vec<usize>,
    /// Comma-separated steps, run at the largest particle count.
    #[arg(long, value_delimiter = ',', default_value = "4e-3,1e-3,2.5e-4")]
    pub dts: Vec<f64>,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
}

fn load(args: &MkvModelArgs, n: Option<usize>, dt: Option<f64>) -> Result<(RawMkvScenario, MkvScenario), CliError> {
    let mut raw = match (&args.scenario, args.model) {
        (Some(path), _) => load_mkv_scenario(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            .0,
        (None, Some(model)) => parse_mkv_scenario(model.text())?,
        (None, None) => return Err(CliError::Validation("give --scenario or --model".into())),
    };
    if let Some(n) = n {
        raw.simulation.n = n;
    }
    if let Some(dt) = dt {
        raw.simulation.step = positive("dt", dt)?;
    }
    if let Some(end) = args.horizon {
        raw.simulation.end = positive("T", end)?;
    }
    let built = raw.build()?;
    Ok((raw, built))
}

pub(crate) fn run(cmd: &MkvCommand, ctx: &mut Context) -> Result<Completion, CliError> {
    match cmd {
        MkvCommand::Run(a) => simulate(a, ctx),
        MkvCommand::Rate(a) => rate(a, ctx),
    }
}

#[derive(Serialize)]
struct RepSummary {
    rep: usize,
    mean: f64,
    variance: f64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    model: &'a str,
    n: usize,
    step: f64,
    end: f64,
    seed: u64,
    replications: Vec<RepSummary>,
    mean: Estimate,
    variance: Estimate,
    /// Limit law at `end` when the model has a closed form.
    oracle: Option<OuMoments>,
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn simulate(args: &MkvRunArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let (raw, sc) = load(&args.model, args.n, args.dt)?;
    if args.reps == 0 {
        return Err(CliError::Validation("--reps must be at least 1".into()));
    }
    if args.snapshot_every == Some(0) {
        return Err(CliError::Validation("--snapshot-every must be at least 1".into()));
    }
    let cfg = ParticleConfig {
        snapshot_every: args.snapshot_every,
        ..ParticleConfig::new(sc.n, sc.step, sc.end, ctx.seed)
    };
    let runs = (0..args.reps)
        .into_par_iter()
        .map(|rep| simulate_particles(&sc.model, &cfg, rep))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(["rep", "t", "j", "x"]);
    for (rep, run) in runs.iter().enumerate() {
        for (t, xs) in run.times.iter().zip(&run.positions) {
            for (j, &x) in xs.iter().enumerate() {
                csv.row(vec![rep.to_string(), num(*t), j.to_string(), num(x)]);
            }
        }
    }
    ctx.out.csv("mkv_particles.csv", &csv)?;
    let replications: Vec<RepSummary> = runs
        .iter()
        .enumerate()
        .map(|(rep, r)| {
            let (mean, variance) = moments(r.last());
            RepSummary { rep, mean, variance }
        })
        .collect();
    let oracle = match (sc.model.ou, &sc.model.initial) {
        (Some(p), InitialLaw::Gaussian { mean, variance }) => Some(ou_oracle(p.a, p.b, p.s, *mean, *variance, sc.end)?),
        (Some(p), InitialLaw::Point { at }) => Some(ou_oracle(p.a, p.b, p.s, *at, 0.0, sc.end)?),
        _ => None,
    };
    let means: Vec<f64> = replications.iter().map(|r| r.mean).collect();
    let variances: Vec<f64> = replications.iter().map(|r| r.variance).collect();
    ctx.out.json(
        "mkv_run.json",
        &RunSummary {
            scenario: &sc.name,
            model: &raw.model,
            n: sc.n,
            step: sc.step,
            end: sc.end,
            seed: ctx.seed,
            mean: Estimate::from_samples(&means),
            variance: Estimate::from_samples(&variances),
            replications,
            oracle,
        },
    )?;
    Ok(Completion::Done)
}

fn rate(args: &MkvRateArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let (_, sc) = load(&args.model, None, None)?;
    for &dt in &args.dts {
        positive("dts", dt)?;
    }
    let study = rate_study(
        &sc.model,
        &RateStudyConfig {
            ns: args.ns.clone(),
            steps: args.dts.clone(),
            end: sc.end,
            replications: args.reps,
            seed: ctx.seed,
        },
    )?;
    let mut csv = Csv::new(["sweep", "n", "step", "error", "std_error"]);
    for (sweep, rows) in [("n", &study.n_rows), ("step", &study.step_rows)] {
        for row in rows {
            csv.row(vec![
                sweep.to_string(),
                row.n.to_string(),
                num(row.step),
                num(row.error.mean),
                num(row.error.std_error),
            ]);
        }
    }
    ctx.out.csv("mkv_rate.csv", &csv)?;
    ctx.out.json("mkv_rate.json", &study)?;
    Ok(Completion::Done)
}
