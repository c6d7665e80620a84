use std::path::PathBuf;

use clap::{Args, Subcommand};
use mfgkit_core::bsk::{
    solve_bsk_fixed_point, verify_support_condition, FixedPointOptions, MfeSolution,
    SmoothingSchedule, SupportReport,
};
use serde::{Deserialize, Serialize};

use super::{policy_csv, positive, scenario, trajectory_csv};
use crate::{CliError, Completion, Context};

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BskCommand {
    /// Solve for a discrete-time mean field equilibrium.
    Solve(BskSolveArgs),
    /// Check a stored solution against the support condition.
    Verify(BskVerifyArgs),
}

impl BskCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            BskCommand::Solve(_) => "solve",
            BskCommand::Verify(_) => "verify",
        }
    }

    pub(crate) fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            BskCommand::Solve(a) => vec![&mut a.scenario],
            BskCommand::Verify(a) => vec![&mut a.scenario, &mut a.solution],
        }
    }
}

/// Fixed-point iteration settings shared by the discrete and continuous solvers.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IterationArgs {
    /// Weight of the new best-response trajectory in each update.
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Stopping threshold on the sup-L1 change of the mean field.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Initial logit temperature; best responses are exact without it.
    #[arg(long)]
    pub smooth: Option<f64>,
    /// Factor applied to the temperature at every drop.
    #[arg(long, default_value_t = 0.5)]
    pub smooth_factor: f64,
    /// Iterations between temperature drops.
    #[arg(long, default_value_t = 50)]
    pub smooth_every: usize,
}

impl IterationArgs {
    pub(crate) fn options(&self, risk_mu: Option<f64>) -> Result<FixedPointOptions<f64>, CliError> {
        let opts = FixedPointOptions {
            damping: self.damping,
            max_iters: self.max_iters,
            tolerance: self.tol,
            smoothing: self.smooth.map(|initial| SmoothingSchedule {
                initial,
                factor: self.smooth_factor,
                every: self.smooth_every,
            }),
            risk_mu,
            ..FixedPointOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BskSolveArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub iteration: IterationArgs,
    /// Risk-sensitivity parameter of the exponential criterion.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Mass below which an action counts as unplayed in the support check.
    #[arg(long, default_value_t = 1e-9)]
    pub verify_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BskVerifyArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// `bsk_solution.json` written by `bsk solve`.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Serialize, Deserialize)]
struct SolutionFile {
    scenario: String,
    solution: MfeSolution<f64>,
    support: SupportReport<f64>,
}

pub(crate) fn run(cmd: &BskCommand, ctx: &mut Context) -> Result<Completion, CliError> {
    match cmd {
        BskCommand::Solve(args) => solve(args, ctx),
        BskCommand::Verify(args) => verify(args, ctx),
    }
}

fn solve(args: &BskSolveArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.scenario)?;
    positive("verify-tol", args.verify_tol)?;
    let opts = args.iteration.options(args.mu)?;
    let sol = solve_bsk_fixed_point(&s, &opts)?;
    let support = verify_support_condition(&s, &sol, args.verify_tol);
    ctx.out.csv("bsk_trajectory.csv", &trajectory_csv(&s, &sol.mean_field))?;
    ctx.out.csv("bsk_policy.csv", &policy_csv(&s, &sol.policy, sol.mean_field.times()))?;
    let converged = sol.converged;
    let (iterations, residual) = (sol.iterations, sol.residual);
    ctx.out.json(
        "bsk_solution.json",
        &SolutionFile {
            scenario: s.name.clone(),
            solution: sol,
            support,
        },
    )?;
    if converged {
        Ok(Completion::Done)
    } else {
        eprintln!("not converged after {iterations} iterations (residual {residual:e}); best iterate written");
        Ok(Completion::NotConverged)
    }
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    scenario: &'a str,
    solution: String,
    tol: f64,
    support: SupportReport<f64>,
}

fn verify(args: &BskVerifyArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.scenario)?;
    positive("tol", args.tol)?;
    let text = std::fs::read_to_string(&args.solution)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.solution.display())))?;
    let stored: SolutionFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.solution.display())))?;
    stored.solution.policy.check_shape(&s.space)?;
    let support = verify_support_condition(&s, &stored.solution, args.tol);
    let ok = support.ok;
    ctx.out.json(
        "bsk_verify.json",
        &VerifyFile {
            scenario: &s.name,
            solution: args.solution.display().to_string(),
            tol: args.tol,
            support,
        },
    )?;
    if ok {
        Ok(Completion::Done)
    } else {
        eprintln!("support condition violated");
        Ok(Completion::CheckFailed)
    }
}
