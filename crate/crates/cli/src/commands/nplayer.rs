use std::path::PathBuf;

use clap::{Args, Subcommand};
use mfgkit_core::families::CsmaLimit;
use mfgkit_core::format::validate_scenario;
use mfgkit_core::Scenario;
use mfgkit_sim::fit::Estimate;
use mfgkit_sim::nplayer::{
    chaos_study, convergence_study, double_limit_experiment, l1_trajectory_distance,
    mean_field_reference, simulate_nplayer, stationary_backoff, InitMode, SimConfig,
};
use serde::{Deserialize, Serialize};

use super::{mass_columns, positive, raw_scenario, scenario, trajectory_csv};
use crate::output::{num, Csv};
use crate::{CliError, Completion, Context};

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NplayerCommand {
    /// Simulate the n-player chain and compare it with the mean field.
    Run(NplayerRunArgs),
    /// Distance to the mean field as a function of n.
    Rate(NplayerRateArgs),
    /// Pairwise correlation of two players as a function of n.
    Chaos(ChaosArgs),
    /// Long-run behaviour of the chain against its mean field flow.
    Doublelimit(DoubleLimitArgs),
    /// Stationary backoff distribution of the random access protocol.
    Csma(CsmaArgs),
}

impl NplayerCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            NplayerCommand::Run(_) => "run",
            NplayerCommand::Rate(_) => "rate",
            NplayerCommand::Chaos(_) => "chaos",
            NplayerCommand::Doublelimit(_) => "doublelimit",
            NplayerCommand::Csma(_) => "csma",
        }
    }

    pub(crate) fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            NplayerCommand::Run(a) => vec![&mut a.common.scenario],
            NplayerCommand::Rate(a) => vec![&mut a.common.scenario],
            NplayerCommand::Chaos(a) => vec![&mut a.common.scenario],
            NplayerCommand::Doublelimit(a) => {
                let mut v = vec![&mut a.common.scenario];
                v.extend(a.limit_scenario.as_mut());
                v
            }
            NplayerCommand::Csma(a) => vec![&mut a.scenario],
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Start from `n·m0` rounded by largest remainder instead of iid draws.
    #[arg(long)]
    pub exact_init: bool,
    /// Recording grid step for continuous-time scenarios.
    #[arg(long)]
    pub record_step: Option<f64>,
}

impl SimArgs {
    fn config(&self, n: usize, seed: u64) -> Result<SimConfig, CliError> {
        if let Some(step) = self.record_step {
            positive("record-step", step)?;
        }
        Ok(SimConfig {
            init: if self.exact_init {
                InitMode::ExactProportions
            } else {
                InitMode::Iid
            },
            record_step: self.record_step,
            ..SimConfig::new(n, seed, self.reps)
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NplayerRunArgs {
    #[command(flatten)]
    pub common: SimArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of players whose individual paths are written.
    #[arg(long, default_value_t = 0)]
    pub tagged: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NplayerRateArgs {
    #[command(flatten)]
    pub common: SimArgs,
    /// Comma-separated player counts.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    pub ns: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChaosArgs {
    #[command(flatten)]
    pub common: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    pub ns: Vec<usize>,
    /// Test function of the first player, one value per state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi1: Vec<f64>,
    /// Test function of the second player; defaults to the first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi2: Vec<f64>,
    /// Time at which the pair is observed; defaults to the horizon.
    #[arg(long)]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DoubleLimitArgs {
    #[command(flatten)]
    pub common: SimArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Scenario whose mean field flow is the limit; defaults to the chain
    /// scenario with its mutation removed.
    #[arg(long)]
    pub limit_scenario: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CsmaArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Number of nodes; defaults to the scenario's `nodes`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub slots: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    /// Success probability used by the mean field (product or exponential).
    #[arg(long)]
    pub limit: Option<String>,
}

pub(crate) fn run(cmd: &NplayerCommand, ctx: &mut Context) -> Result<Completion, CliError> {
    match cmd {
        NplayerCommand::Run(a) => simulate(a, ctx),
        NplayerCommand::Rate(a) => rate(a, ctx),
        NplayerCommand::Chaos(a) => chaos(a, ctx),
        NplayerCommand::Doublelimit(a) => double_limit(a, ctx),
        NplayerCommand::Csma(a) => csma(a, ctx),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    n: usize,
    replications: usize,
    seed: u64,
    /// Time-averaged L1 distance between each replication and the mean field.
    l1_to_mean_field: Estimate,
    final_mean: Vec<Vec<f64>>,
    final_mean_field: Vec<Vec<f64>>,
}

fn simulate(args: &NplayerRunArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.common.scenario)?;
    let cfg = SimConfig {
        tagged: args.tagged,
        ..args.common.config(args.n, ctx.seed)?
    };
    let run = simulate_nplayer(&s, &cfg)?;
    let reference = mean_field_reference(&s, &cfg)?;
    let mean = run.mean_trajectory()?;
    let distances = run
        .replications
        .iter()
        .map(|r| l1_trajectory_distance(r, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.out.csv("nplayer_mean.csv", &trajectory_csv(&s, &mean))?;
    ctx.out.csv("nplayer_mean_field.csv", &trajectory_csv(&s, &reference))?;
    if args.tagged > 0 {
        let mut csv = Csv::new(["rep", "player", "t", "state"]);
        for (rep, r) in run.replications.iter().enumerate() {
            for (j, path) in r.tagged.iter().enumerate() {
                for (&t, &x) in r.times.iter().zip(path) {
                    csv.row(vec![rep.to_string(), j.to_string(), num(t), s.space.states()[x].clone()]);
                }
            }
        }
        ctx.out.csv("nplayer_tagged.csv", &csv)?;
    }
    let profiles = |m: &mfgkit_core::Trajectory| m.last().iter().map(|p| p.as_slice().to_vec()).collect();
    ctx.out.json(
        "nplayer_run.json",
        &RunSummary {
            scenario: &s.name,
            n: args.n,
            replications: args.common.reps,
            seed: ctx.seed,
            l1_to_mean_field: Estimate::from_samples(&distances),
            final_mean: profiles(&mean),
            final_mean_field: profiles(&reference),
        },
    )?;
    Ok(Completion::Done)
}

fn rate(args: &NplayerRateArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.common.scenario)?;
    let n0 = args.ns.first().copied().unwrap_or(1);
    let study = convergence_study(&s, &args.ns, &args.common.config(n0, ctx.seed)?)?;
    let mut csv = Csv::new(["n", "distance", "std_error"]);
    for row in &study.rows {
        csv.row(vec![row.n.to_string(), num(row.distance.mean), num(row.distance.std_error)]);
    }
    ctx.out.csv("nplayer_rate.csv", &csv)?;
    ctx.out.json("nplayer_rate.json", &study)?;
    Ok(Completion::Done)
}

fn chaos(args: &ChaosArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.common.scenario)?;
    let phi1 = if args.phi1.is_empty() {
        (0..s.n_states()).map(|x| if x == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        args.phi1.clone()
    };
    let phi2 = if args.phi2.is_empty() { phi1.clone() } else { args.phi2.clone() };
    let time = args.time.unwrap_or_else(|| s.horizon.end());
    let n0 = args.ns.first().copied().unwrap_or(2);
    let study = chaos_study(&s, &args.ns, &args.common.config(n0, ctx.seed)?, &phi1, &phi2, time)?;
    let mut csv = Csv::new(["n", "gap", "std_error", "product_moment", "product_of_means"]);
    for row in &study.rows {
        csv.row(vec![
            row.n.to_string(),
            num(row.gap.gap),
            num(row.gap.std_error),
            num(row.gap.product_moment),
            num(row.gap.product_of_means),
        ]);
    }
    ctx.out.csv("nplayer_chaos.csv", &csv)?;
    ctx.out.json("nplayer_chaos.json", &study)?;
    Ok(Completion::Done)
}

/// The chain scenario with its mutation rate removed.
fn mutation_free(path: &std::path::Path) -> Result<Scenario, CliError> {
    let mut raw = raw_scenario(path)?;
    raw.kernel.mutation = None;
    validate_scenario(&raw).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn double_limit(args: &DoubleLimitArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let chain = scenario(&args.common.scenario)?;
    let limit = match &args.limit_scenario {
        Some(p) => scenario(p)?,
        None => mutation_free(&args.common.scenario)?,
    };
    let report = double_limit_experiment(&limit, &chain, &args.common.config(args.n, ctx.seed)?)?;
    let mut csv = Csv::new(["quantity".to_string()].into_iter().chain(mass_columns(&chain)));
    for (label, v) in [("rest_point", &report.rest_point), ("ergodic_average", &report.ergodic_average)] {
        csv.row(std::iter::once(label.to_string()).chain(v.iter().map(|&x| num(x))).collect());
    }
    ctx.out.csv("nplayer_doublelimit.csv", &csv)?;
    ctx.out.json("nplayer_doublelimit.json", &report)?;
    Ok(Completion::Done)
}

fn csma(args: &CsmaArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let raw = raw_scenario(&args.scenario)?;
    validate_scenario::<f64>(&raw).map_err(|e| CliError::Validation(format!("{}: {e}", args.scenario.display())))?;
    let params = raw
        .csma_params()
        .ok_or_else(|| CliError::Validation("nplayer csma needs a scenario with kernel family \"csma\"".into()))?;
    let n = args.n.or(raw.kernel.nodes).unwrap_or(1000);
    let limit = match args.limit.as_deref() {
        None => raw.kernel.limit.unwrap_or(CsmaLimit::Exponential),
        Some("product") => CsmaLimit::Product,
        Some("exponential") => CsmaLimit::Exponential,
        Some(other) => {
            return Err(CliError::Validation(format!(
                "--limit must be product or exponential, got {other}"
            )))
        }
    };
    let study = stationary_backoff(&params, n, limit, args.slots, args.burn_in, ctx.seed)?;
    let mut csv = Csv::new(["state", "simulated", "mean_field"]);
    for (x, label) in raw.states.iter().enumerate() {
        csv.row(vec![label.clone(), num(study.simulated.stationary[x]), num(study.mean_field[x])]);
    }
    ctx.out.csv("nplayer_csma.csv", &csv)?;
    ctx.out.json("nplayer_csma.json", &study)?;
    Ok(Completion::Done)
}
