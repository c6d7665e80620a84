use serde::{Deserialize, Serialize};

use super::backward::{backward_bellman_with, check_discrete_traj, Expectation, Selection};
use super::forward::forward_kolmogorov;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::scenario::ScenarioModel;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory, ValueTable};

/// Largest number of paths the enumeration oracles will visit.
pub const ENUMERATION_LIMIT: f64 = 1e6;

/// Largest exponent accepted by the raw-space recursion.
const RAW_EXPONENT_LIMIT: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskOptions {
    /// Run the recursion on `log W` instead of `W`.
    pub log_space: bool,
}

impl Default for RiskOptions {
    fn default() -> Self {
        Self { log_space: true }
    }
}

/// Multiplicative Bellman recursion for `W = e^{μ v}`; returns `v = (1/μ) log W`
/// and the maximizing policy of the certainty equivalent.
pub fn risk_sensitive_backward<T: Scalar>(
    scenario: &ScenarioModel<T>,
    mu: T,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    risk_sensitive_backward_with(scenario, mu, m_traj, RiskOptions::default())
}

pub fn risk_sensitive_backward_with<T: Scalar>(
    scenario: &ScenarioModel<T>,
    mu: T,
    m_traj: &MeanFieldTrajectory<T>,
    opts: RiskOptions,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    if mu == T::zero() || !mu.is_finite() {
        return Err(Error::InvalidParameter("risk parameter must be nonzero".into()));
    }
    if opts.log_space {
        backward_bellman_with(
            scenario,
            m_traj,
            Expectation::CertaintyEquivalent(mu),
            Selection::Argmax,
        )
    } else {
        raw_backward(scenario, mu, m_traj)
    }
}

fn raw_exp<T: Scalar>(exponent: T) -> Result<T> {
    if exponent.abs() > T::lit(RAW_EXPONENT_LIMIT) || !exponent.is_finite() {
        return Err(Error::Overflow {
            exponent: exponent.to_f64_lossy(),
        });
    }
    Ok(exponent.exp())
}

fn raw_backward<T: Scalar>(
    scenario: &ScenarioModel<T>,
    mu: T,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    let stages = check_discrete_traj(scenario, m_traj)?;
    let n = scenario.n_states();
    let types = scenario.n_types();
    let limit = T::lit(RAW_EXPONENT_LIMIT);

    let mut w: Vec<Vec<T>> = (0..types)
        .map(|ty| {
            (0..n)
                .map(|x| raw_exp(mu * scenario.payoff.terminal(ty, x, m_traj.at(stages))))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let to_values = |w: &[Vec<T>]| -> Vec<Vec<T>> {
        w.iter()
            .map(|row| row.iter().map(|&x| x.ln() / mu).collect())
            .collect()
    };
    let mut values = vec![to_values(&w)];
    let mut policy = Vec::with_capacity(stages);
    let mut row = vec![T::zero(); n];

    for t in (0..stages).rev() {
        let m_t = m_traj.at(t);
        let tt = T::from_usize_lossy(t);
        let mut w_t = Vec::with_capacity(types);
        let mut u_t = Vec::with_capacity(types);
        for (ty, w_next) in w.iter().enumerate() {
            let mut w_ty = Vec::with_capacity(n);
            let mut u_ty = Vec::with_capacity(n);
            for x in 0..n {
                let n_act = scenario.space.n_actions(ty, x);
                let mut chosen = 0;
                let mut chosen_w = T::nan();
                for a in 0..n_act {
                    scenario.kernel.row_into(tt, ty, x, a, m_t, &mut row);
                    let cont: T = row.iter().zip(w_next).map(|(&q, &v)| q * v).sum();
                    let cand = raw_exp(mu * scenario.payoff.reward(tt, ty, x, a, m_t))? * cont;
                    let better = if mu > T::zero() { cand > chosen_w } else { cand < chosen_w };
                    if a == 0 || better {
                        chosen = a;
                        chosen_w = cand;
                    }
                }
                if !(chosen_w > T::zero()) || !chosen_w.is_finite() || chosen_w.ln().abs() > limit {
                    return Err(Error::Overflow {
                        exponent: chosen_w.ln().to_f64_lossy(),
                    });
                }
                let mut d = vec![T::zero(); n_act];
                d[chosen] = T::one();
                w_ty.push(chosen_w);
                u_ty.push(d);
            }
            w_t.push(w_ty);
            u_t.push(u_ty);
        }
        w = w_t;
        values.push(to_values(&w));
        policy.push(u_t);
    }
    values.reverse();
    policy.reverse();
    Ok((ValueTable::new(values), PolicyTrajectory::new(policy)?))
}

/// Every path's `(probability, total reward)` under `u`, per type and initial
/// state. The mean field is the one generated by `u` from the scenario's `m0`.
pub fn enumerate_returns<T: Scalar>(
    scenario: &ScenarioModel<T>,
    u: &PolicyTrajectory<T>,
) -> Result<Vec<Vec<Vec<(T, T)>>>> {
    let m_traj = forward_kolmogorov(scenario, u, &scenario.m0)?;
    enumerate_returns_along(scenario, u, &m_traj)
}

/// [`enumerate_returns`] along a given mean-field trajectory.
pub fn enumerate_returns_along<T: Scalar>(
    scenario: &ScenarioModel<T>,
    u: &PolicyTrajectory<T>,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<Vec<Vec<Vec<(T, T)>>>> {
    let stages = check_discrete_traj(scenario, m_traj)?;
    u.check_shape(&scenario.space)?;
    let branching = (scenario.n_states() * scenario.space.max_actions()) as f64;
    let paths = branching.powi(stages as i32);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }
    let walker = Walker {
        scenario,
        u,
        m_traj,
        stages,
    };
    Ok((0..scenario.n_types())
        .map(|ty| {
            (0..scenario.n_states())
                .map(|x0| {
                    let mut out = Vec::new();
                    walker.walk(ty, 0, x0, T::one(), T::zero(), &mut out);
                    out
                })
                .collect()
        })
        .collect())
}

struct Walker<'a, T> {
    scenario: &'a ScenarioModel<T>,
    u: &'a PolicyTrajectory<T>,
    m_traj: &'a MeanFieldTrajectory<T>,
    stages: usize,
}

impl<T: Scalar> Walker<'_, T> {
    fn walk(&self, ty: usize, t: usize, x: usize, p: T, acc: T, out: &mut Vec<(T, T)>) {
        let m_t = self.m_traj.at(t);
        if t == self.stages {
            out.push((p, acc + self.scenario.payoff.terminal(ty, x, m_t)));
            return;
        }
        let tt = T::from_usize_lossy(t);
        for (a, &pa) in self.u.dist(t, ty, x).iter().enumerate() {
            if pa == T::zero() {
                continue;
            }
            let r = self.scenario.payoff.reward(tt, ty, x, a, m_t);
            let row = self.scenario.kernel.row(tt, ty, x, a, m_t);
            for (y, &q) in row.iter().enumerate() {
                if q > T::zero() {
                    self.walk(ty, t + 1, y, p * pa * q, acc + r, out);
                }
            }
        }
    }
}

/// `(1/μ) log Σ p·e^{μR}` of each initial state, by exhaustive path enumeration.
pub fn enumerate_risk_value_oracle<T: Scalar>(
    scenario: &ScenarioModel<T>,
    mu: T,
    u: &PolicyTrajectory<T>,
) -> Result<Vec<Vec<T>>> {
    let m_traj = forward_kolmogorov(scenario, u, &scenario.m0)?;
    enumerate_risk_value_oracle_along(scenario, mu, u, &m_traj)
}

/// [`enumerate_risk_value_oracle`] along a given mean-field trajectory.
pub fn enumerate_risk_value_oracle_along<T: Scalar>(
    scenario: &ScenarioModel<T>,
    mu: T,
    u: &PolicyTrajectory<T>,
    m_traj: &MeanFieldTrajectory<T>,
) -> Result<Vec<Vec<T>>> {
    if mu == T::zero() || !mu.is_finite() {
        return Err(Error::InvalidParameter("risk parameter must be nonzero".into()));
    }
    Ok(enumerate_returns_along(scenario, u, m_traj)?
        .iter()
        .map(|per_state| {
            per_state
                .iter()
                .map(|paths| return_stats(paths, Some(mu)).certainty_equivalent)
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats<T> {
    pub mean: T,
    pub variance: T,
    /// Equals `mean` when no risk parameter is given.
    pub certainty_equivalent: T,
}

pub fn return_stats<T: Scalar>(paths: &[(T, T)], mu: Option<T>) -> ReturnStats<T> {
    let mean: T = paths.iter().map(|&(p, r)| p * r).sum();
    let variance: T = paths.iter().map(|&(p, r)| p * (r - mean) * (r - mean)).sum();
    let certainty_equivalent = match mu {
        Some(mu) => {
            let terms: Vec<T> = paths.iter().map(|&(p, r)| p.ln() + mu * r).collect();
            log_sum_exp(&terms) / mu
        }
        None => mean,
    };
    ReturnStats {
        mean,
        variance,
        certainty_equivalent,
    }
}

