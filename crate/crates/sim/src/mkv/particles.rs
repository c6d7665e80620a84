use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::model::{InitialLaw, MkvModel, Weights};
use crate::error::{Result, SimError};
use crate::rng::player_stream;

/// Positions beyond this magnitude abort the run.
pub const BLOWUP: f64 = 1e12;

/// Fixed-point scale for order-independent summation.
const SCALE: f64 = (1u64 << 60) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub n: usize,
    pub step: f64,
    pub end: f64,
    pub seed: u64,
    /// Keep every `k`-th step (the initial and final positions are always kept).
    pub snapshot_every: Option<usize>,
    /// Random stream of each particle; the identity when absent.
    pub streams: Option<Vec<usize>>,
}

impl ParticleConfig {
    pub fn new(n: usize, step: f64, end: f64, seed: u64) -> Self {
        Self {
            n,
            step,
            end,
            seed,
            snapshot_every: None,
            streams: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleRun {
    pub step: f64,
    pub times: Vec<f64>,
    /// `positions[s][j]` at `times[s]`.
    pub positions: Vec<Vec<f64>>,
}

impl ParticleRun {
    pub fn last(&self) -> &[f64] {
        self.positions.last().expect("initial snapshot present")
    }
}

/// `Σ_j w_j x_j` with each term rounded to a multiple of 2⁻⁶⁰ and accumulated
/// exactly, so the result does not depend on the summation order.
pub fn exact_weighted_mean<'a>(terms: impl Iterator<Item = (f64, f64)> + 'a) -> f64 {
    let mut acc: i128 = 0;
    for (w, x) in terms {
        acc += ((w * x) * SCALE).round() as i128;
    }
    acc as f64 / SCALE
}

fn averages(weights: &Weights, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    match weights {
        Weights::Uniform => {
            let inv = 1.0 / n as f64;
            let mean = exact_weighted_mean(x.iter().map(|&xi| (inv, xi)));
            vec![mean; n]
        }
        Weights::Dense(w) => (0..n)
            .map(|j| exact_weighted_mean(x.iter().enumerate().map(|(i, &xi)| (w[i][j], xi))))
            .collect(),
    }
}

fn initial_positions(model: &MkvModel, n: usize, rngs: &mut [ChaCha8Rng]) -> Result<Vec<f64>> {
    match &model.initial {
        InitialLaw::Gaussian { mean, variance } => {
            if !(*variance >= 0.0) {
                return Err(SimError::InvalidConfig(format!("initial variance {variance} is negative")));
            }
            let sd = variance.sqrt();
            Ok(rngs
                .iter_mut()
                .map(|rng| {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + sd * z
                })
                .collect())
        }
        InitialLaw::Point { at } => Ok(vec![*at; n]),
        InitialLaw::Positions { values } => {
            if values.len() != n {
                return Err(SimError::InvalidConfig(format!(
                    "{} initial positions for {n} particles",
                    values.len()
                )));
            }
            Ok(values.clone())
        }
    }
}

/// Weighted Euler scheme
/// `x_j ← x_j + δ Σ_i ω_ij f(t, x_j, u_j, x_i) + Σ_i ω_ij σ(t, x_j, u_j, x_i)·ΔB_j`
/// for replication `rep`. Particle `j` owns one random stream: its initial
/// draw and then one Gaussian increment per step.
pub fn simulate_particles(model: &MkvModel, cfg: &ParticleConfig, rep: usize) -> Result<ParticleRun> {
    if cfg.n == 0 {
        return Err(SimError::InvalidConfig("particle count must be at least 1".into()));
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(SimError::StepInvalid(format!("step {} must be positive", cfg.step)));
    }
    let steps = mfgkit_core::scenario::grid_steps(cfg.end, cfg.step)
        .map_err(|e| SimError::StepInvalid(e.to_string()))?;
    model.weights.validate(cfg.n)?;
    if let Some(streams) = &cfg.streams {
        crate::nplayer::check_permutation(streams, cfg.n)?;
    }
    let every = cfg.snapshot_every.unwrap_or(usize::MAX).max(1);
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n)
        .map(|j| player_stream(cfg.seed, rep, cfg.streams.as_ref().map_or(j, |s| s[j])))
        .collect();
    let mut x = initial_positions(model, cfg.n, &mut rngs)?;
    let sqrt_dt = cfg.step.sqrt();
    let mut times = vec![0.0];
    let mut positions = vec![x.clone()];
    for k in 0..steps {
        let t = k as f64 * cfg.step;
        let w_bar = averages(&model.weights, &x);
        for (j, (xj, rng)) in x.iter_mut().zip(rngs.iter_mut()).enumerate() {
            let u = (model.control)(t, *xj);
            let f = model.drift.averaged(t, *xj, u, w_bar[j]);
            let s = model.volatility.averaged(t, *xj, u, w_bar[j]);
            let z: f64 = StandardNormal.sample(rng);
            *xj += cfg.step * f + s * sqrt_dt * z;
            if !(xj.abs() <= BLOWUP) {
                return Err(SimError::NumericalBlowup {
                    t: t + cfg.step,
                    value: *xj,
                });
            }
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            times.push((k + 1) as f64 * cfg.step);
            positions.push(x.clone());
        }
    }
    Ok(ParticleRun {
        step: cfg.step,
        times,
        positions,
    })
}

/// Final positions of replications `0..reps`, in replication order.
pub(crate) fn final_positions(model: &MkvModel, cfg: &ParticleConfig, reps: usize) -> Result<Vec<Vec<f64>>> {
    let cfg = ParticleConfig {
        snapshot_every: None,
        ..cfg.clone()
    };
    (0..reps)
        .into_par_iter()
        .map(|rep| simulate_particles(model, &cfg, rep).map(|run| run.last().to_vec()))
        .collect()
}
