mod bsk;
mod dynamics;
mod mfg;
mod mkv;
mod nplayer;

use std::path::Path;

pub use bsk::{BskCommand, BskSolveArgs, BskVerifyArgs};
pub use dynamics::{DynamicsArgs, DynamicsCommand, MethodArg, RestPointArgs};
pub use mfg::{MfgCommand, MfgControlArgs, MfgSolveArgs};
pub use mkv::{MkvCommand, MkvModelArgs, MkvRateArgs, MkvRunArgs};
pub use nplayer::{
    ChaosArgs, CsmaArgs, DoubleLimitArgs, NplayerCommand, NplayerRateArgs, NplayerRunArgs,
};

use mfgkit_core::format::{load_scenario, parse_scenario, RawScenario};
use mfgkit_core::{Scenario, Trajectory};

use crate::output::{num, Csv};
use crate::{CliError, Command, Completion, Context};

pub fn dispatch(command: &Command, ctx: &mut Context) -> Result<Completion, CliError> {
    match command {
        Command::Dynamics(c) => dynamics::run(c, ctx),
        Command::Bsk(c) => bsk::run(c, ctx),
        Command::Mfg(c) => mfg::run(c, ctx),
        Command::Nplayer(c) => nplayer::run(c, ctx),
        Command::Mkv(c) => mkv::run(c, ctx),
        Command::Replay(_) => Err(CliError::Internal("replay cannot be nested".into())),
    }
}

pub(crate) fn scenario(path: &Path) -> Result<Scenario, CliError> {
    load_scenario(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub(crate) fn raw_scenario(path: &Path) -> Result<RawScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Column names `m_<state>` (or `m_<type>_<state>` with several types).
pub(crate) fn mass_columns(s: &Scenario) -> Vec<String> {
    let states = s.space.states();
    let types = s.space.types();
    let mut cols = Vec::new();
    for ty in types {
        for x in states {
            cols.push(if types.len() == 1 {
                format!("m_{x}")
            } else {
                format!("m_{ty}_{x}")
            });
        }
    }
    cols
}

pub(crate) fn trajectory_csv(s: &Scenario, m: &Trajectory) -> Csv {
    let mut header = vec!["t".to_string()];
    header.extend(mass_columns(s));
    let mut csv = Csv::new(header);
    for k in 0..m.len() {
        let mut row = vec![num(m.times()[k])];
        for p in m.at(k) {
            row.extend(p.as_slice().iter().map(|&v| num(v)));
        }
        csv.row(row);
    }
    csv
}

pub(crate) fn policy_csv(s: &Scenario, u: &mfgkit_core::Policy, times: &[f64]) -> Csv {
    let mut csv = Csv::new(["t", "type", "state", "action", "probability"]);
    for (k, stage) in u.stages().iter().enumerate() {
        for (ty, per_type) in stage.iter().enumerate() {
            for (x, dist) in per_type.iter().enumerate() {
                for (a, &p) in dist.iter().enumerate() {
                    csv.row(vec![
                        num(times[k]),
                        s.space.types()[ty].clone(),
                        s.space.states()[x].clone(),
                        s.space.actions(ty, x)[a].clone(),
                        num(p),
                    ]);
                }
            }
        }
    }
    csv
}

pub(crate) fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("--{name} must be positive, got {v}")))
    }
}
