use std::path::PathBuf;

use clap::{Args, Subcommand};
use mfgkit_core::hjb::{
    exploitability, solve_mf_control_simplex_dp, solve_mfg_fixed_point, Exploitability,
    PlannerProblem, SimplexGrid,
};
use mfgkit_core::bsk::MfeSolution;
use mfgkit_core::{Horizon, Scenario};
use serde::{Deserialize, Serialize};

use super::bsk::IterationArgs;
use super::{policy_csv, positive, scenario, trajectory_csv};
use crate::output::{num, Csv};
use crate::{CliError, Completion, Context};

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfgCommand {
    /// Solve the continuous-time mean field game on a time grid.
    Solve(MfgSolveArgs),
    /// Solve the population control problem by dynamic programming on the simplex.
    Control(MfgControlArgs),
}

impl MfgCommand {
    pub fn verb(&self) -> &'static str {
        match self {
            MfgCommand::Solve(_) => "solve",
            MfgCommand::Control(_) => "control",
        }
    }

    pub(crate) fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            MfgCommand::Solve(a) => vec![&mut a.scenario],
            MfgCommand::Control(a) => vec![&mut a.scenario],
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MfgSolveArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Time step; defaults to the scenario's step.
    #[arg(long)]
    pub dt: Option<f64>,
    #[command(flatten)]
    pub iteration: IterationArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MfgControlArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simplex grid resolution: points have masses in multiples of 1/k.
    #[arg(long, default_value_t = 20)]
    pub grid_k: usize,
}

pub(crate) fn run(cmd: &MfgCommand, ctx: &mut Context) -> Result<Completion, CliError> {
    match cmd {
        MfgCommand::Solve(args) => solve(args, ctx),
        MfgCommand::Control(args) => control(args, ctx),
    }
}

fn step(s: &Scenario, dt: Option<f64>) -> Result<f64, CliError> {
    match (s.horizon, dt) {
        (Horizon::Continuous { .. }, Some(dt)) => positive("dt", dt),
        (Horizon::Continuous { step, .. }, None) => Ok(step),
        (Horizon::Discrete { .. }, _) => Err(CliError::Validation(
            "continuous-time solvers need a scenario with a continuous horizon".into(),
        )),
    }
}

#[derive(Serialize)]
struct SolveFile<'a> {
    scenario: &'a str,
    dt: f64,
    solution: &'a MfeSolution<f64>,
    exploitability: Exploitability<f64>,
}

fn solve(args: &MfgSolveArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.scenario)?;
    let dt = step(&s, args.dt)?;
    let opts = args.iteration.options(None)?;
    let sol = solve_mfg_fixed_point(&s, &opts, dt)?;
    let gap = exploitability(&s, &sol, dt)?;
    ctx.out.csv("mfg_trajectory.csv", &trajectory_csv(&s, &sol.mean_field))?;
    ctx.out.csv("mfg_policy.csv", &policy_csv(&s, &sol.policy, sol.mean_field.times()))?;
    ctx.out.json(
        "mfg_solution.json",
        &SolveFile {
            scenario: &s.name,
            dt,
            solution: &sol,
            exploitability: gap,
        },
    )?;
    if sol.converged {
        Ok(Completion::Done)
    } else {
        eprintln!(
            "not converged after {} iterations (residual {:e}); best iterate written",
            sol.iterations, sol.residual
        );
        Ok(Completion::NotConverged)
    }
}

#[derive(Serialize)]
struct ControlFile<'a> {
    scenario: &'a str,
    dt: f64,
    grid_k: usize,
    grid_points: usize,
    controls: &'a [String],
    initial_profile: Vec<f64>,
    value_at_initial_profile: f64,
}

fn control(args: &MfgControlArgs, ctx: &mut Context) -> Result<Completion, CliError> {
    let s = scenario(&args.scenario)?;
    let dt = step(&s, args.dt)?;
    let problem = PlannerProblem::from_scenario(&s)?;
    let grid = SimplexGrid::new(s.n_states(), args.grid_k)?;
    let sol = solve_mf_control_simplex_dp(&problem, &grid, dt)?;
    let mut header = vec!["t".to_string()];
    header.extend(s.space.states().iter().map(|x| format!("m_{x}")));
    header.extend(["value".to_string(), "control".to_string()]);
    let mut csv = Csv::new(header);
    for (k, &t) in sol.times.iter().enumerate() {
        for i in 0..grid.len() {
            let point = grid.point::<f64>(i);
            let mut row = vec![num(t)];
            row.extend(point.as_slice().iter().map(|&v| num(v)));
            row.push(num(sol.values[k][i]));
            row.push(sol.policy.get(k).map_or(String::new(), |p| problem.controls[p[i]].clone()));
            csv.row(row);
        }
    }
    ctx.out.csv("mfg_control.csv", &csv)?;
    let m0 = s.m0[0].as_slice().to_vec();
    ctx.out.json(
        "mfg_control.json",
        &ControlFile {
            scenario: &s.name,
            dt,
            grid_k: args.grid_k,
            grid_points: grid.len(),
            controls: &problem.controls,
            value_at_initial_profile: sol.value_at(&grid, 0, &m0),
            initial_profile: m0,
        },
    )?;
    Ok(Completion::Done)
}
