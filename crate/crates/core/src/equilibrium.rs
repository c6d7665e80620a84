//! Static population-game equilibrium check: the support of the profile must
//! lie in the argmax of the payoff.

use serde::Serialize;

use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport<T> {
    pub is_equilibrium: bool,
    /// Largest payoff shortfall among supported states.
    pub max_gap: T,
    pub violating_states: Vec<usize>,
}

pub fn check_population_equilibrium<T, F>(
    m: &SimplexVector<T>,
    payoff: F,
    tol: T,
) -> EquilibriumReport<T>
where
    T: Scalar,
    F: Fn(&SimplexVector<T>) -> Vec<T>,
{
    let r = payoff(m);
    let best = r.iter().copied().fold(T::neg_infinity(), T::max);
    let mut max_gap = T::zero();
    let mut violating_states = Vec::new();
    for (x, &rx) in r.iter().enumerate() {
        if m[x] > tol {
            let gap = best - rx;
            max_gap = max_gap.max(gap);
            if gap > tol {
                violating_states.push(x);
            }
        }
    }
    EquilibriumReport {
        is_equilibrium: violating_states.is_empty(),
        max_gap,
        violating_states,
    }
}
