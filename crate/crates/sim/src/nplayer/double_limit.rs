use mfgkit_core::dynamics::{find_rest_points, RateKernel};
use mfgkit_core::hjb::forward_kfe;
use mfgkit_core::{policy_averaged_kernel, KernelMode, Policy, Scenario, Simplex};
use serde::Serialize;

use super::simulate::{replicate, setup, SimConfig};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleLimitReport {
    pub rest_point: Vec<f64>,
    /// Window `[T/2, T]` over which both distances are taken.
    pub window: (f64, f64),
    /// Smallest L1 distance of the limiting flow to the rest point over the window.
    pub mf_min_distance_to_rest: f64,
    /// The same for the flow of the finite-n chain's own kernel.
    pub chain_flow_min_distance_to_rest: f64,
    /// Time average of `M^n_t` over the window, averaged over replications.
    pub ergodic_average: Vec<f64>,
    pub ergodic_distance_to_rest: f64,
    pub n: usize,
    pub replications: usize,
}

/// Population rates of a single-type continuous scenario under a fixed policy stage.
struct ScenarioRates<'a> {
    scenario: &'a Scenario,
    stage: &'a [Vec<f64>],
}

impl RateKernel<f64> for ScenarioRates<'_> {
    fn n_states(&self) -> usize {
        self.scenario.n_states()
    }

    fn rates(&self, m: &Simplex) -> Vec<Vec<f64>> {
        policy_averaged_kernel(
            &self.scenario.kernel,
            KernelMode::ContinuousRate,
            0,
            self.stage,
            std::slice::from_ref(m),
            0.0,
        )
        .expect("kernel validated with the scenario")
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn min_distance_over_window(scenario: &Scenario, u: &Policy, rest: &[f64], from: f64) -> Result<f64> {
    let step = match scenario.horizon {
        mfgkit_core::Horizon::Continuous { step, .. } => step,
        mfgkit_core::Horizon::Discrete { .. } => unreachable!("mode checked"),
    };
    let m = forward_kfe(scenario, u, &scenario.m0, step)?;
    Ok(m.times()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= from)
        .map(|(k, _)| l1(m.profile(k, 0).as_slice(), rest))
        .fold(f64::INFINITY, f64::min))
}

/// Compares the long-run behaviour of the mean field flow of `limit` (the
/// `n → ∞` limit taken first) with the time-averaged empirical measure of the
/// finite-n chain of `chain` (the `t → ∞` limit taken first).
pub fn double_limit_experiment(limit: &Scenario, chain: &Scenario, cfg: &SimConfig) -> Result<DoubleLimitReport> {
    for s in [limit, chain] {
        if s.mode() != KernelMode::ContinuousRate || s.n_types() != 1 {
            return Err(SimError::InvalidConfig(
                "the double-limit experiment needs single-type continuous scenarios".into(),
            ));
        }
    }
    if limit.n_states() != chain.n_states() || limit.horizon != chain.horizon {
        return Err(SimError::InvalidConfig("limit and chain scenarios differ in shape".into()));
    }
    let u = setup(limit, cfg)?.policy;
    let rates = ScenarioRates {
        scenario: limit,
        stage: &u.stage(0)[0],
    };
    let seeds = vec![Simplex::uniform(limit.n_states()), limit.m0[0].clone()];
    let report = find_rest_points(&rates, &seeds, 1e-12);
    let rest = report
        .points
        .iter()
        .max_by(|a, b| {
            let ma = a.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            let mb = b.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            ma.total_cmp(&mb)
        })
        .ok_or_else(|| SimError::InvalidConfig("no rest point found for the limiting flow".into()))?
        .as_slice()
        .to_vec();
    let end = limit.horizon.end();
    let from = end / 2.0;
    let mf = min_distance_over_window(limit, &u, &rest, from)?;
    let chain_u = setup(chain, cfg)?.policy;
    let chain_mf = min_distance_over_window(chain, &chain_u, &rest, from)?;

    let n_states = chain.n_states();
    let averages = replicate(chain, cfg, |run| {
        let mut acc = vec![0.0; n_states];
        let mut count = 0usize;
        for k in 0..run.len() {
            if run.times[k] >= from {
                for (a, x) in acc.iter_mut().zip(0..n_states) {
                    *a += run.mass(k, 0, x);
                }
                count += 1;
            }
        }
        Ok(acc.into_iter().map(|a| a / count as f64).collect::<Vec<f64>>())
    })?;
    let mut ergodic = vec![0.0; n_states];
    for avg in &averages {
        for (e, a) in ergodic.iter_mut().zip(avg) {
            *e += a / averages.len() as f64;
        }
    }
    Ok(DoubleLimitReport {
        ergodic_distance_to_rest: l1(&ergodic, &rest),
        rest_point: rest,
        window: (from, end),
        mf_min_distance_to_rest: mf,
        chain_flow_min_distance_to_rest: chain_mf,
        ergodic_average: ergodic,
        n: cfg.n,
        replications: cfg.replications,
    })
}
