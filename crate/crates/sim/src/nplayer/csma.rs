use mfgkit_core::families::{csma_kernel, CsmaLimit, CsmaParams};
use mfgkit_core::{Horizon, PayoffSpec, Scenario, Simplex, StateSpace};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::rng::player_stream;

/// Discrete-time backoff scenario over states `0..=K` with all nodes starting in state 0.
pub fn csma_scenario(params: &CsmaParams<f64>, n: usize, limit: CsmaLimit, stages: usize) -> Result<Scenario> {
    params.validate()?;
    let labels: Vec<String> = (0..=params.k).map(|x| format!("b{x}")).collect();
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let space = StateSpace::simple(&refs, &["run"])?;
    let states = params.k + 1;
    let payoff = PayoffSpec::from_tables(vec![vec![vec![0.0]; states]], vec![vec![0.0; states]]);
    Ok(Scenario::single_type(
        "csma",
        space,
        csma_kernel(params, n, limit)?,
        payoff,
        Horizon::Discrete { stages },
        Simplex::point_mass(states, 0),
    )?)
}

/// Fixed point `m = m·L(m)` of the mean field backoff chain by repeated
/// application from the uniform profile.
pub fn csma_fixed_point(params: &CsmaParams<f64>, n: usize, limit: CsmaLimit, tol: f64, max_iters: usize) -> Result<Simplex> {
    let p = params.attempt_probabilities(n)?;
    let states = params.k + 1;
    let mut m = Simplex::uniform(states);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let mut next = vec![0.0; states];
        for x in 0..states {
            let s = params.success_probability(&p, n, x, &m, limit);
            next[x] += m[x] * (1.0 - p[x]);
            next[0] += m[x] * p[x] * s;
            next[params.after_failure(x)] += m[x] * p[x] * (1.0 - s);
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let next = Simplex::new(next)?;
        residual = next.l1_distance(&m);
        m = next;
        if residual <= tol {
            return Ok(m);
        }
    }
    Err(mfgkit_core::Error::NotConverged {
        iterations: max_iters,
        residual,
    }
    .into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsmaRun {
    pub n: usize,
    pub slots: usize,
    pub burn_in: usize,
    /// Time average of the empirical backoff distribution after burn-in.
    pub stationary: Vec<f64>,
    /// Fraction of slots with exactly one attempt.
    pub success_rate: f64,
    /// Fraction of slots with two or more attempts.
    pub collision_rate: f64,
}

/// Slot-synchronous simulation of `n` nodes: each node in state `x` attempts
/// with probability `p_x`; a lone attempt succeeds and resets to 0, colliding
/// attempts advance their backoff state, idle nodes stay.
pub fn simulate_csma(params: &CsmaParams<f64>, n: usize, slots: usize, burn_in: usize, seed: u64) -> Result<CsmaRun> {
    if burn_in >= slots {
        return Err(SimError::InvalidConfig(format!(
            "burn-in {burn_in} must be shorter than {slots} slots"
        )));
    }
    let p = params.attempt_probabilities(n)?;
    let states = params.k + 1;
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|j| player_stream(seed, 0, j)).collect();
    let mut state = vec![0usize; n];
    let mut counts = vec![0u64; states];
    counts[0] = 0;
    let mut live = vec![0usize; states];
    live[0] = n;
    let mut attempts: Vec<usize> = Vec::new();
    let (mut successes, mut collisions) = (0usize, 0usize);
    for slot in 0..slots {
        attempts.clear();
        for (j, rng) in rngs.iter_mut().enumerate() {
            if rng.random::<f64>() < p[state[j]] {
                attempts.push(j);
            }
        }
        match attempts.len() {
            0 => {}
            1 => {
                let j = attempts[0];
                live[state[j]] -= 1;
                live[0] += 1;
                state[j] = 0;
                successes += 1;
            }
            _ => {
                for &j in &attempts {
                    let next = params.after_failure(state[j]);
                    live[state[j]] -= 1;
                    live[next] += 1;
                    state[j] = next;
                }
                collisions += 1;
            }
        }
        if slot >= burn_in {
            for (c, &l) in counts.iter_mut().zip(&live) {
                *c += l as u64;
            }
        }
    }
    let window = (slots - burn_in) as f64;
    Ok(CsmaRun {
        n,
        slots,
        burn_in,
        stationary: counts.iter().map(|&c| c as f64 / (window * n as f64)).collect(),
        success_rate: successes as f64 / slots as f64,
        collision_rate: collisions as f64 / slots as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsmaStudy {
    pub simulated: CsmaRun,
    pub mean_field: Vec<f64>,
    pub limit: CsmaLimit,
    pub l1_distance: f64,
}

/// Simulated stationary backoff distribution against the mean field fixed point.
pub fn stationary_backoff(
    params: &CsmaParams<f64>,
    n: usize,
    limit: CsmaLimit,
    slots: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CsmaStudy> {
    let simulated = simulate_csma(params, n, slots, burn_in, seed)?;
    let mean_field = csma_fixed_point(params, n, limit, 1e-14, 10_000_000)?.into_vec();
    let l1_distance = simulated
        .stationary
        .iter()
        .zip(&mean_field)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(CsmaStudy {
        simulated,
        mean_field,
        limit,
        l1_distance,
    })
}
