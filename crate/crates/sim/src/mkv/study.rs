use serde::Serialize;

use super::cdf::{EmpiricalCdf, GaussianCdf};
use super::model::{InitialLaw, MkvModel};
use super::oracle::ou_oracle;
use super::particles::{final_positions, simulate_particles, ParticleConfig};
use crate::error::{Result, SimError};
use crate::fit::{log_log_slope, Estimate};
use crate::nplayer::MIN_REPLICATIONS;

/// Quadrature tolerance for distances to an analytic law.
const W1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyConfig {
    pub ns: Vec<usize>,
    pub steps: Vec<f64>,
    pub end: f64,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub step: f64,
    /// `E ∫ |F̃(T, w) − F̃ⁿ(T, w)| dw`.
    pub error: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStudy {
    /// `"ou-oracle"` or `"fine-grid"`.
    pub reference: String,
    /// Varying `n` at the smallest step.
    pub n_rows: Vec<RateRow>,
    /// Varying the step at the largest `n`.
    pub step_rows: Vec<RateRow>,
    pub n_order: f64,
    pub step_order: f64,
    pub replications: usize,
}

enum Reference {
    Gaussian(GaussianCdf),
    Sample(EmpiricalCdf),
}

impl Reference {
    fn distance(&self, positions: &[f64]) -> Result<f64> {
        let f = EmpiricalCdf::uniform(positions)?;
        match self {
            Reference::Gaussian(g) => f.w1_analytic(g, W1_TOL),
            Reference::Sample(r) => Ok(f.w1(r)),
        }
    }
}

fn analytic_reference(model: &MkvModel, end: f64) -> Result<Option<GaussianCdf>> {
    let Some(p) = model.ou else { return Ok(None) };
    let (mean0, var0) = match model.initial {
        InitialLaw::Gaussian { mean, variance } => (mean, variance),
        InitialLaw::Point { at } => (at, 0.0),
        InitialLaw::Positions { .. } => return Ok(None),
    };
    let m = ou_oracle(p.a, p.b, p.s, mean0, var0, end)?;
    if m.variance > 0.0 {
        Ok(Some(GaussianCdf::new(m.mean, m.variance)?))
    } else {
        Ok(None)
    }
}

/// Monte Carlo table of the CDF distance at `T` against the limit law (the OU
/// oracle when the model has one, otherwise a large-n fine-step run), with
/// fitted orders in `n` and in the step.
pub fn rate_study(model: &MkvModel, cfg: &RateStudyConfig) -> Result<RateStudy> {
    if cfg.replications < MIN_REPLICATIONS {
        return Err(SimError::InsufficientReplications {
            got: cfg.replications,
            needed: MIN_REPLICATIONS,
        });
    }
    if cfg.ns.len() < 2 || cfg.steps.len() < 2 {
        return Err(SimError::InvalidConfig("a rate study needs two or more values of n and of the step".into()));
    }
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut steps = cfg.steps.clone();
    steps.sort_by(|a, b| b.total_cmp(a));
    steps.dedup();
    let n_max = *ns.last().expect("non-empty");
    let step_min = *steps.last().expect("non-empty");

    let (reference, label) = match analytic_reference(model, cfg.end)? {
        Some(g) => (Reference::Gaussian(g), "ou-oracle"),
        None => {
            let run = simulate_particles(
                model,
                &ParticleConfig::new(4 * n_max, step_min / 16.0, cfg.end, cfg.seed ^ 0x5EED_0F_5EED),
                0,
            )?;
            (Reference::Sample(EmpiricalCdf::uniform(run.last())?), "fine-grid")
        }
    };
    let cell = |n: usize, step: f64| -> Result<RateRow> {
        let pcfg = ParticleConfig::new(n, step, cfg.end, cfg.seed);
        let finals = final_positions(model, &pcfg, cfg.replications)?;
        let errors = finals
            .iter()
            .map(|x| reference.distance(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(RateRow {
            n,
            step,
            error: Estimate::from_samples(&errors),
        })
    };
    let n_rows = ns.iter().map(|&n| cell(n, step_min)).collect::<Result<Vec<_>>>()?;
    let shared = n_rows.last().expect("non-empty").clone();
    let step_rows = steps
        .iter()
        .map(|&s| if s == step_min { Ok(shared.clone()) } else { cell(n_max, s) })
        .collect::<Result<Vec<_>>>()?;
    let fit = |rows: &[RateRow], x: fn(&RateRow) -> f64| {
        let xs: Vec<f64> = rows.iter().map(x).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error.mean).collect();
        log_log_slope(&xs, &ys).0
    };
    Ok(RateStudy {
        reference: label.into(),
        n_order: fit(&n_rows, |r| r.n as f64),
        step_order: fit(&step_rows, |r| r.step),
        n_rows,
        step_rows,
        replications: cfg.replications,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceCheck {
    pub sample_variance: f64,
    pub oracle_variance: f64,
    /// Standard error of the sample variance of `n` Gaussian draws.
    pub std_error: f64,
    /// `(sample − oracle) / std_error`.
    pub z: f64,
}

/// Sample variance of the particles at `end` against the OU oracle.
pub fn variance_check(model: &MkvModel, n: usize, step: f64, end: f64, seed: u64) -> Result<VarianceCheck> {
    let oracle = analytic_reference(model, end)?
        .ok_or_else(|| SimError::InvalidConfig("variance check needs an OU model with a Gaussian limit".into()))?;
    let run = simulate_particles(
        model,
        &ParticleConfig::new(n, step, end, seed),
        0,
    )?;
    let x = run.last();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let sample_variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let oracle_variance = oracle.sd * oracle.sd;
    let std_error = oracle_variance * (2.0 / (nf - 1.0)).sqrt();
    Ok(VarianceCheck {
        sample_variance,
        oracle_variance,
        std_error,
        z: (sample_variance - oracle_variance) / std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub reference_step: f64,
    /// `(step, max_j |x_j(T) − x_j^ref(T)|)`.
    pub rows: Vec<(f64, f64)>,
    pub order: f64,
}

/// Pathwise global error at `end` against a fine-step run from the same
/// initial positions, with the fitted order in the step.
pub fn deterministic_order(
    model: &MkvModel,
    n: usize,
    steps: &[f64],
    reference_step: f64,
    end: f64,
    seed: u64,
) -> Result<OrderStudy> {
    let run = |step: f64| {
        simulate_particles(
            model,
            &ParticleConfig::new(n, step, end, seed),
            0,
        )
    };
    let reference = run(reference_step)?;
    let rows = steps
        .iter()
        .map(|&s| {
            let r = run(s)?;
            let err = r
                .last()
                .iter()
                .zip(reference.last())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((s, err))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(OrderStudy {
        reference_step,
        order: log_log_slope(&xs, &ys).0,
        rows,
    })
}
