#![allow(dead_code)]

use std::path::PathBuf;

use mfgkit_core::format::load_scenario;
use mfgkit_core::{Horizon, KernelMode, PayoffSpec, Scenario, Simplex, StateSpace, TransitionKernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn bundled(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const DISCRETE_BUNDLED: [&str; 5] = [
    "crowd.toml",
    "lottery.toml",
    "anticoord.toml",
    "oscillate.toml",
    "csma.toml",
];

pub const FINITE_BUNDLED: [&str; 9] = [
    "crowd.toml",
    "crowd_ct.toml",
    "lottery.toml",
    "anticoord.toml",
    "oscillate.toml",
    "csma.toml",
    "twostate.toml",
    "herding.toml",
    "rps.toml",
];

/// An m-independent MDP with dyadic-rational data, so sums are exact.
pub struct RandomMdp {
    pub states: usize,
    pub actions: Vec<usize>,
    pub stages: usize,
    /// `[x][a][x']`
    pub kernel: Vec<Vec<Vec<f64>>>,
    /// `[x][a]`
    pub reward: Vec<Vec<f64>>,
    pub terminal: Vec<f64>,
}

impl RandomMdp {
    pub fn generate(seed: u64, max_states: usize, max_actions: usize, max_stages: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = rng.random_range(1..=max_states);
        let stages = rng.random_range(1..=max_stages);
        let actions: Vec<usize> = (0..states).map(|_| rng.random_range(1..=max_actions)).collect();
        let kernel = actions
            .iter()
            .map(|&k| {
                (0..k)
                    .map(|_| {
                        // 16 units of mass spread over the targets
                        let mut row = vec![0.0; states];
                        for _ in 0..16 {
                            row[rng.random_range(0..states)] += 1.0 / 16.0;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let eighth = |rng: &mut ChaCha8Rng| rng.random_range(-8i32..=8) as f64 / 8.0;
        let reward = actions
            .iter()
            .map(|&k| (0..k).map(|_| eighth(&mut rng)).collect())
            .collect();
        let terminal = (0..states).map(|_| eighth(&mut rng)).collect();
        Self {
            states,
            actions,
            stages,
            kernel,
            reward,
            terminal,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let labels: Vec<String> = (0..self.states).map(|i| format!("s{i}")).collect();
        let acts: Vec<Vec<String>> = self
            .actions
            .iter()
            .map(|&k| (0..k).map(|a| format!("a{a}")).collect())
            .collect();
        let space = StateSpace::new(labels, vec!["population".into()], vec![acts]).unwrap();
        Scenario::single_type(
            "random-mdp",
            space,
            TransitionKernelSpec::from_table(KernelMode::DiscreteProbability, vec![self.kernel.clone()])
                .unwrap(),
            PayoffSpec::from_tables(vec![self.reward.clone()], vec![self.terminal.clone()]),
            Horizon::Discrete { stages: self.stages },
            Simplex::uniform(self.states),
        )
        .unwrap()
    }

    /// Plain finite-horizon backward induction: `(values[t][x], argmax[t][x])`,
    /// ties to the first maximizer.
    pub fn backward_induction(&self) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
        let mut values = vec![vec![0.0; self.states]; self.stages + 1];
        let mut choice = vec![vec![0; self.states]; self.stages];
        values[self.stages] = self.terminal.clone();
        for t in (0..self.stages).rev() {
            for x in 0..self.states {
                let mut best = f64::NEG_INFINITY;
                for a in 0..self.actions[x] {
                    let mut q = self.reward[x][a];
                    for y in 0..self.states {
                        q += self.kernel[x][a][y] * values[t + 1][y];
                    }
                    if q > best {
                        best = q;
                        choice[t][x] = a;
                    }
                }
                values[t][x] = best;
            }
        }
        (values, choice)
    }
}
