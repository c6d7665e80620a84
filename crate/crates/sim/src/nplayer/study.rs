use mfgkit_core::bsk::forward_kolmogorov;
use mfgkit_core::hjb::forward_kfe;
use mfgkit_core::{Horizon, Scenario, Trajectory};
use serde::Serialize;

use super::simulate::{replicate, setup, EmpiricalTrajectory, SimConfig};
use crate::error::{Result, SimError};
use crate::fit::{log_log_slope, Estimate};

/// Fewest replications a rate study accepts.
pub const MIN_REPLICATIONS: usize = 30;

/// Mean field limit `m_t` of the scenario under the configured policy, on the
/// horizon grid.
pub fn mean_field_reference(scenario: &Scenario, cfg: &SimConfig) -> Result<Trajectory> {
    let u = setup(scenario, cfg)?.policy;
    Ok(match scenario.horizon {
        Horizon::Discrete { .. } => forward_kolmogorov(scenario, &u, &scenario.m0)?,
        Horizon::Continuous { step, .. } => forward_kfe(scenario, &u, &scenario.m0, step)?,
    })
}

/// `sup_t Σ_x |M^n_t(x) − m_t(x)|` over the grid of `m` (largest over types),
/// reading `M^n` as piecewise constant between its recording times.
pub fn l1_trajectory_distance(mn: &EmpiricalTrajectory, m: &Trajectory) -> Result<f64> {
    if mn.n_types() != m.at(0).len() || mn.n_states() != m.profile(0, 0).len() {
        return Err(mfgkit_core::Error::GridMismatch("type or state counts differ".into()).into());
    }
    let (Some(&first), Some(&last)) = (mn.times.first(), mn.times.last()) else {
        return Err(mfgkit_core::Error::GridMismatch("empty empirical trajectory".into()).into());
    };
    let span = m.times().last().copied().unwrap_or(0.0).abs().max(1.0);
    let eps = 1e-9 * span;
    if first > m.times()[0] + eps || last < m.times()[m.len() - 1] - eps {
        return Err(mfgkit_core::Error::GridMismatch(format!(
            "empirical grid [{first}, {last}] does not cover [{}, {}]",
            m.times()[0],
            m.times()[m.len() - 1]
        ))
        .into());
    }
    let mut j = 0;
    let mut worst: f64 = 0.0;
    for (k, &t) in m.times().iter().enumerate() {
        while j + 1 < mn.len() && mn.times[j + 1] <= t + eps {
            j += 1;
        }
        for ty in 0..mn.n_types() {
            let d: f64 = (0..mn.n_states())
                .map(|x| (mn.mass(j, ty, x) - m.profile(k, ty)[x]).abs())
                .sum();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub distance: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub replications: usize,
    /// Least-squares slope of `ln E sup_t ‖M^n − m‖₁` against `ln n`.
    pub slope: f64,
    pub intercept: f64,
}

/// Monte Carlo estimate of `E sup_t ‖M^n_t − m_t‖₁` for each `n`, with the
/// fitted log-log slope.
pub fn convergence_study(scenario: &Scenario, ns: &[usize], cfg: &SimConfig) -> Result<ConvergenceStudy> {
    if ns.len() < 3 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::InvalidConfig(
            "a rate study needs at least three strictly increasing player counts".into(),
        ));
    }
    if cfg.replications < MIN_REPLICATIONS {
        return Err(SimError::InsufficientReplications {
            got: cfg.replications,
            needed: MIN_REPLICATIONS,
        });
    }
    let m = mean_field_reference(scenario, cfg)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let cfg = SimConfig { n, tagged: 0, ..cfg.clone() };
            let d = replicate(scenario, &cfg, |run| l1_trajectory_distance(&run, &m))?;
            Ok(ConvergenceRow {
                n,
                distance: Estimate::from_samples(&d),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.distance.mean).collect();
    let (slope, intercept) = log_log_slope(&xs, &ys);
    Ok(ConvergenceStudy {
        rows,
        replications: cfg.replications,
        slope,
        intercept,
    })
}
