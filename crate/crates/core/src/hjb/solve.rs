use serde::{Deserialize, Serialize};

use super::backward::{backward_hjb, backward_hjb_with, policy_value};
use super::forward::forward_kfe;
use crate::bsk::{damped_fixed_point, FixedPointOptions, MfeSolution};
use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::scalar::Scalar;
use crate::scenario::{grid_steps, ScenarioModel};
use crate::trajectory::MeanFieldTrajectory;

pub(crate) fn steps_for<T: Scalar>(scenario: &ScenarioModel<T>, dt: T) -> Result<usize> {
    scenario.mode().expect(KernelMode::ContinuousRate)?;
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    grid_steps(scenario.horizon.end(), dt)
}

/// Uniform grid `0, dt, …, T` over the scenario horizon.
pub fn time_grid<T: Scalar>(scenario: &ScenarioModel<T>, dt: T) -> Result<Vec<T>> {
    let steps = steps_for(scenario, dt)?;
    Ok((0..=steps).map(|k| T::from_usize_lossy(k) * dt).collect())
}

/// Damped best-response iteration alternating [`backward_hjb`] and
/// [`forward_kfe`] on the grid of step `dt`.
pub fn solve_mfg_fixed_point<T: Scalar>(
    scenario: &ScenarioModel<T>,
    opts: &FixedPointOptions<T>,
    dt: T,
) -> Result<MfeSolution<T>> {
    if opts.risk_mu.is_some() {
        return Err(Error::InvalidParameter(
            "risk-sensitive criteria are only available in discrete time".into(),
        ));
    }
    let initial = MeanFieldTrajectory::constant(time_grid(scenario, dt)?, scenario.m0.clone())?;
    damped_fixed_point(
        initial,
        opts,
        |m, k| backward_hjb_with(scenario, m, dt, opts.selection(k)),
        |u| forward_kfe(scenario, u, &scenario.m0, dt),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploitability<T> {
    /// `max_{ty,x} (v^BR_0(x) − v^u_0(x))`.
    pub max_gap: T,
    /// The same gap averaged over `m0` (and over types by type mass).
    pub weighted_gap: T,
    /// Per type and state at `t = 0`.
    pub gaps: Vec<Vec<T>>,
}

/// Gain available to a single deviating player facing the solution's mean field.
pub fn exploitability<T: Scalar>(
    scenario: &ScenarioModel<T>,
    sol: &MfeSolution<T>,
    dt: T,
) -> Result<Exploitability<T>> {
    let (best, _) = backward_hjb(scenario, &sol.mean_field, dt)?;
    let own = policy_value(scenario, &sol.policy, &sol.mean_field, dt)?;
    let gaps: Vec<Vec<T>> = best
        .initial()
        .iter()
        .zip(own.initial())
        .map(|(b, o)| b.iter().zip(o).map(|(&x, &y)| x - y).collect())
        .collect();
    let max_gap = gaps
        .iter()
        .flatten()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let weighted_gap = gaps
        .iter()
        .enumerate()
        .map(|(ty, g)| scenario.type_mass[ty] * scenario.m0[ty].expectation(g))
        .sum();
    Ok(Exploitability {
        max_gap,
        weighted_gap,
        gaps,
    })
}
