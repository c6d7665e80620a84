use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::scalar::{argmax_first, log_sum_exp, softmax, Scalar};
use crate::scenario::ScenarioModel;
use crate::simplex::SimplexVector;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory, ValueTable};

/// How the continuation value is aggregated over next states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation<T> {
    /// `Σ_{x'} q(x')·v(x')`.
    Linear,
    /// Certainty equivalent `(1/μ)·log Σ_{x'} q(x')·e^{μ v(x')}`, computed in log space.
    CertaintyEquivalent(T),
}

impl<T: Scalar> Expectation<T> {
    pub fn apply(&self, q: &[T], v: &[T]) -> T {
        match *self {
            Expectation::Linear => q.iter().zip(v).map(|(&p, &w)| p * w).sum(),
            Expectation::CertaintyEquivalent(mu) => {
                let terms: Vec<T> = q
                    .iter()
                    .zip(v)
                    .filter(|(&p, _)| p > T::zero())
                    .map(|(&p, &w)| p.ln() + mu * w)
                    .collect();
                log_sum_exp(&terms) / mu
            }
        }
    }
}

/// How a stage policy is extracted from the action values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection<T> {
    /// Pure argmax, ties to the lowest action index.
    Argmax,
    /// Logit choice at the given temperature.
    Softmax(T),
}

impl<T: Scalar> Selection<T> {
    pub fn distribution(&self, q: &[T]) -> Vec<T> {
        match *self {
            Selection::Argmax => {
                let mut d = vec![T::zero(); q.len()];
                d[argmax_first(q)] = T::one();
                d
            }
            Selection::Softmax(eta) => softmax(q, eta),
        }
    }
}

pub(crate) fn check_discrete_traj<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<usize> {
    scenario.mode().expect(KernelMode::DiscreteProbability)?;
    let stages = scenario.horizon.steps()?;
    if m_traj.len() != stages + 1 {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} points, horizon needs {}",
            m_traj.len(),
            stages + 1
        )));
    }
    Ok(stages)
}

/// Action values `r_t(x,a,m_t) + E[v_{t+1}]` for every action of `(ty, x)` at stage `t`.
pub fn stage_q_values<T: Scalar>(
    scenario: &ScenarioModel<T>,
    t: usize,
    ty: usize,
    x: usize,
    m_t: &[SimplexVector<T>],
    v_next: &[T],
    expectation: Expectation<T>,
) -> Vec<T> {
    let tt = T::from_usize_lossy(t);
    let mut row = vec![T::zero(); scenario.n_states()];
    (0..scenario.space.n_actions(ty, x))
        .map(|a| {
            scenario.kernel.row_into(tt, ty, x, a, m_t, &mut row);
            if cfg!(debug_assertions) {
                scenario
                    .kernel
                    .check_row(&row, tt, ty, x, a)
                    .expect("kernel invariant at solver evaluation");
            }
            scenario.payoff.reward(tt, ty, x, a, m_t) + expectation.apply(&row, v_next)
        })
        .collect()
}

/// Risk-neutral backward induction along a fixed mean-field trajectory.
pub fn backward_bellman<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    backward_bellman_with(scenario, m_traj, Expectation::Linear, Selection::Argmax)
}

/// Backward induction with a chosen continuation aggregator and policy rule.
/// Values are the expectation of the selected policy (equal to the maximum
/// under `Selection::Argmax`).
pub fn backward_bellman_with<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
    expectation: Expectation<T>,
    selection: Selection<T>,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    let stages = check_discrete_traj(scenario, m_traj)?;
    let n = scenario.n_states();
    let types = scenario.n_types();

    let terminal: Vec<Vec<T>> = (0..types)
        .map(|ty| {
            (0..n)
                .map(|x| scenario.payoff.terminal(ty, x, m_traj.at(stages)))
                .collect()
        })
        .collect();
    let mut values = vec![terminal];
    let mut policy = Vec::with_capacity(stages);

    for t in (0..stages).rev() {
        let m_t = m_traj.at(t);
        let next = values.last().expect("terminal row present");
        let mut v_t = Vec::with_capacity(types);
        let mut u_t = Vec::with_capacity(types);
        for (ty, v_next) in next.iter().enumerate() {
            let mut v_ty = Vec::with_capacity(n);
            let mut u_ty = Vec::with_capacity(n);
            for x in 0..n {
                let q = stage_q_values(scenario, t, ty, x, m_t, v_next, expectation);
                let dist = selection.distribution(&q);
                let v = match selection {
                    Selection::Argmax => q[argmax_first(&q)],
                    Selection::Softmax(_) => dist.iter().zip(&q).map(|(&p, &w)| p * w).sum(),
                };
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { stage: t, ty, state: x });
                }
                v_ty.push(v);
                u_ty.push(dist);
            }
            v_t.push(v_ty);
            u_t.push(u_ty);
        }
        values.push(v_t);
        policy.push(u_t);
    }
    values.reverse();
    policy.reverse();
    Ok((ValueTable::new(values), PolicyTrajectory::new(policy)?))
}
