use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use mfgkit_core::dynamics::{
    find_rest_points, integrate_forward_detailed, mean_field_drift, protocol_to_kernel,
    IntegratorConfig, Method, MutatedKernel, ProtocolKind, RateKernel, RevisionProtocol,
};
use mfgkit_core::scenario::uniform_type_policy;
use mfgkit_core::{policy_averaged_kernel, Horizon, KernelMode, Scenario, Simplex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{positive, scenario, trajectory_csv};
use crate::{CliError, Completion, Context};

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DynamicsCommand {
    /// Integrate the mean field flow and write the trajectory.
    Run(DynamicsArgs),
    /// Search for rest points of the mean field flow.
    Restpoints(RestPointArgs),
}

impl DynamicsCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            DynamicsCommand::Run(_) => "run",
            DynamicsCommand::Restpoints(_) => "restpoints",
        }
    }

    pub(crate) fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            DynamicsCommand::Run(a) => vec![&mut a.flow.scenario],
            DynamicsCommand::Restpoints(a) => vec![&mut a.flow.scenario],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Rk4,
    Euler,
}

/// Which vector field to follow.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FlowArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Revision protocol applied to the scenario's population payoff
    /// (replicator, smith, bnn, smoothed-best-response); without it the
    /// scenario's own rate kernel under the uniform policy is used.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Temperature of the smoothed best response.
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    /// Uniform mutation rate added on top of the protocol.
    #[arg(long)]
    pub mutation: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    /// Integration step; defaults to the scenario's step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon; defaults to the scenario's horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    /// Clamp and rescale onto the simplex after every step.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RestPointArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    /// Random starting points in addition to the uniform profile, `m0` and the vertices.
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Drift sup-norm accepted as a rest point.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

/// Policy-averaged rates of a single-type continuous scenario.
struct ScenarioRates<'a> {
    scenario: &'a Scenario,
    policy: Vec<Vec<f64>>,
}

impl RateKernel<f64> for ScenarioRates<'_> {
    fn n_states(&self) -> usize {
        self.scenario.n_states()
    }

    fn rates(&self, m: &Simplex) -> Vec<Vec<f64>> {
        policy_averaged_kernel(
            &self.scenario.kernel,
            KernelMode::ContinuousRate,
            0,
            &self.policy,
            std::slice::from_ref(m),
            0.0,
        )
        .expect("scenario validated")
    }
}

fn flow<'a>(s: &'a Scenario, args: &FlowArgs) -> Result<Box<dyn RateKernel<f64> + 'a>, CliError> {
    if s.n_types() != 1 {
        return Err(CliError::Validation("evolutionary dynamics need a single-type scenario".into()));
    }
    let base: Box<dyn RateKernel<f64> + 'a> = match &args.protocol {
        Some(name) => {
            let kind = ProtocolKind::from_name(name, args.temperature)?;
            let payoff = s.payoff.population_payoff(&s.space, 0);
            Box::new(protocol_to_kernel(RevisionProtocol::new(kind, payoff, s.n_states()))?)
        }
        None => {
            if s.mode() != KernelMode::ContinuousRate {
                return Err(CliError::Validation(
                    "a discrete-time scenario needs --protocol to define a flow".into(),
                ));
            }
            Box::new(ScenarioRates {
                scenario: s,
                policy: uniform_type_policy(&s.space, 0),
            })
        }
    };
    Ok(match args.mutation {
        Some(eps) if eps < 0.0 || !eps.is_finite() => {
            return Err(CliError::Validation(format!("--mutation must be nonnegative, got {eps}")))
        }
        Some(eps) => Box::new(MutatedKernel { inner: base, epsilon: eps }),
        None => base,
    })
}

pub(crate) fn run(cmd: &DynamicsCommand, ctx: &mut Context) -> Result<Completion, CliError> {
    match cmd {
        DynamicsCommand::Run(args) => integrate(args, ctx),
        DynamicsCommand::Restpoints(args) => rest_points(args, ctx),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    protocol: &'a str,
    method: MethodArg,
    step: f64,
    horizon: f64,
    min_mass: f64,
    max_sum_deviation: f64,
    final_profile: Vec<f64>,
}

fn integrate(args: &DynamicsArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.flow.scenario)?;
    let kernel = flow(&s, &args.flow)?;
    let (default_step, default_end) = match s.horizon {
        Horizon::Continuous { end, step } => (step, Some(end)),
        Horizon::Discrete { .. } => (1e-3, None),
    };
    let step = positive("dt", args.dt.unwrap_or(default_step))?;
    let horizon = args
        .horizon
        .or(default_end)
        .ok_or_else(|| CliError::Validation("--T is required for a discrete-time scenario".into()))?;
    let horizon = positive("T", horizon)?;
    let cfg = IntegratorConfig {
        method: match args.method {
            MethodArg::Rk4 => Method::Rk4,
            MethodArg::Euler => Method::ExplicitEuler,
        },
        step,
        horizon,
        renormalize: args.renormalize,
    };
    let run = integrate_forward_detailed(kernel.as_ref(), &s.m0[0], &cfg)?;
    ctx.out.csv("dynamics.csv", &trajectory_csv(&s, &run.trajectory))?;
    ctx.out.json(
        "dynamics.json",
        &RunSummary {
            scenario: &s.name,
            protocol: args.flow.protocol.as_deref().unwrap_or("scenario-kernel"),
            method: args.method,
            step,
            horizon,
            min_mass: run.min_mass,
            max_sum_deviation: run.max_sum_deviation,
            final_profile: run.trajectory.last()[0].as_slice().to_vec(),
        },
    )?;
    Ok(Completion::Done)
}

#[derive(Serialize)]
struct RestPoint {
    profile: Vec<f64>,
    drift_sup_norm: f64,
}

#[derive(Serialize)]
struct RestPointSummary<'a> {
    scenario: &'a str,
    protocol: &'a str,
    seed: u64,
    starts: usize,
    failed_starts: usize,
    rest_points: Vec<RestPoint>,
}

fn rest_points(args: &RestPointArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.flow.scenario)?;
    let kernel = flow(&s, &args.flow)?;
    positive("tol", args.tol)?;
    let n = s.n_states();
    let mut seeds = vec![Simplex::uniform(n), s.m0[0].clone()];
    seeds.extend((0..n).map(|x| Simplex::point_mass(n, x)));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    seeds.extend((0..args.starts).map(|_| Simplex::random(n, &mut rng)));
    let report = find_rest_points(kernel.as_ref(), &seeds, args.tol);
    let rest_points = report
        .points
        .iter()
        .map(|p| {
            let drift = mean_field_drift(&kernel.rates(p), p)?;
            Ok(RestPoint {
                profile: p.as_slice().to_vec(),
                drift_sup_norm: drift.iter().fold(0.0f64, |a, d| a.max(d.abs())),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    ctx.out.json(
        "restpoints.json",
        &RestPointSummary {
            scenario: &s.name,
            protocol: args.flow.protocol.as_deref().unwrap_or("scenario-kernel"),
            seed: ctx.seed,
            starts: seeds.len(),
            failed_starts: report.failures.len(),
            rest_points,
        },
    )?;
    Ok(Completion::Done)
}
