use serde::{Deserialize, Serialize};

use super::backward::{backward_bellman_with, stage_q_values, Expectation, Selection};
use super::fixed_point::MfeSolution;
use crate::scalar::Scalar;
use crate::scenario::ScenarioModel;

/// A supported action that is not a best response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportWitness<T> {
    pub stage: usize,
    pub ty: usize,
    pub state: usize,
    pub action: usize,
    pub gap: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport<T> {
    pub ok: bool,
    pub worst_gap: T,
    pub witnesses: Vec<SupportWitness<T>>,
}

/// Check that every action played with mass above `tol` is a maximizer of the
/// Bellman action value along the solution's own mean field.
pub fn verify_support_condition<T: Scalar>(
    scenario: &ScenarioModel<T>,
    sol: &MfeSolution<T>,
    tol: T,
) -> SupportReport<T> {
    let expectation = match sol.risk_mu {
        Some(mu) => Expectation::CertaintyEquivalent(mu),
        None => Expectation::Linear,
    };
    let optimal = match backward_bellman_with(scenario, &sol.mean_field, expectation, Selection::Argmax) {
        Ok((v, _)) => v,
        Err(_) => {
            return SupportReport {
                ok: false,
                worst_gap: T::infinity(),
                witnesses: Vec::new(),
            }
        }
    };
    let mut worst = T::zero();
    let mut witnesses = Vec::new();
    for t in 0..sol.policy.len() {
        let m_t = sol.mean_field.at(t);
        for ty in 0..scenario.n_types() {
            let v_next = &optimal.at(t + 1)[ty];
            for x in 0..scenario.n_states() {
                let mx = m_t[ty].get(x);
                let dist = sol.policy.dist(t, ty, x);
                if !dist.iter().any(|&p| mx * p > tol) {
                    continue;
                }
                let q = stage_q_values(scenario, t, ty, x, m_t, v_next, expectation);
                let best = q.iter().copied().fold(T::neg_infinity(), T::max);
                for (a, &p) in dist.iter().enumerate() {
                    if !(mx * p > tol) {
                        continue;
                    }
                    let gap = best - q[a];
                    worst = worst.max(gap);
                    if gap > tol {
                        witnesses.push(SupportWitness {
                            stage: t,
                            ty,
                            state: x,
                            action: a,
                            gap,
                        });
                    }
                }
            }
        }
    }
    SupportReport {
        ok: witnesses.is_empty(),
        worst_gap: worst,
        witnesses,
    }
}
