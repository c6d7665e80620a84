use serde::{Deserialize, Serialize};

use super::backward::{backward_bellman_with, Expectation, Selection};
use super::forward::forward_kolmogorov;
use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::scalar::Scalar;
use crate::scenario::ScenarioModel;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory, ValueTable};

/// Tie-breaking rule among maximizing actions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// Geometric temperature schedule for logit smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSchedule<T> {
    pub initial: T,
    pub factor: T,
    pub every: usize,
}

impl<T: Scalar> Default for SmoothingSchedule<T> {
    fn default() -> Self {
        Self {
            initial: T::one(),
            factor: T::lit(0.5),
            every: 50,
        }
    }
}

impl<T: Scalar> SmoothingSchedule<T> {
    /// Temperature used at (1-based) iteration `k`.
    pub fn temperature(&self, k: usize) -> T {
        let drops = (k.saturating_sub(1) / self.every.max(1)) as i32;
        self.initial * self.factor.powi(drops)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions<T> {
    pub damping: T,
    pub max_iters: usize,
    pub tolerance: T,
    pub tie_break: TieBreak,
    pub smoothing: Option<SmoothingSchedule<T>>,
    /// Risk-sensitivity parameter; `None` is the risk-neutral game.
    pub risk_mu: Option<T>,
    /// Also stop as soon as the best response to the latest forward pass
    /// reproduces it within `tolerance`.
    pub early_exit: bool,
}

impl<T: Scalar> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            damping: T::lit(0.5),
            max_iters: 500,
            tolerance: T::lit(1e-8),
            tie_break: TieBreak::LowestIndex,
            smoothing: None,
            risk_mu: None,
            early_exit: true,
        }
    }
}

impl<T: Scalar> FixedPointOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if let Some(mu) = self.risk_mu {
            if mu == T::zero() || !mu.is_finite() {
                return Err(Error::InvalidParameter("risk parameter must be nonzero".into()));
            }
        }
        if let Some(s) = &self.smoothing {
            if !(s.initial > T::zero() && s.factor > T::zero() && s.factor <= T::one()) {
                return Err(Error::InvalidParameter("invalid smoothing schedule".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn selection(&self, k: usize) -> Selection<T> {
        match &self.smoothing {
            Some(s) => Selection::Softmax(s.temperature(k)),
            None => Selection::Argmax,
        }
    }
}

/// Result of a fixed-point run. `converged == false` marks the best iterate
/// found within the iteration budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfeSolution<T> {
    pub policy: PolicyTrajectory<T>,
    pub mean_field: MeanFieldTrajectory<T>,
    pub values: ValueTable<T>,
    pub residual: T,
    /// sup-L1 change of the trajectory under one more best-response pass.
    pub consistency_gap: T,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<T>,
    /// Final logit temperature when smoothing was active.
    pub smoothing_temperature: Option<T>,
    pub risk_mu: Option<T>,
}

impl<T: Scalar> MfeSolution<T> {
    /// `Err(NotConverged)` for an unconverged run, the solution otherwise.
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual.to_f64_lossy(),
            })
        }
    }
}

pub(crate) struct Candidate<T> {
    policy: PolicyTrajectory<T>,
    mean_field: MeanFieldTrajectory<T>,
    values: ValueTable<T>,
    gap: T,
}

/// Damped best-response iteration on the mean-field trajectory.
///
/// `best_response(m, k)` returns values and policy along `m` at iteration `k`;
/// `forward(u)` returns the trajectory generated by `u`.
pub(crate) fn damped_fixed_point<T, B, F>(
    initial: MeanFieldTrajectory<T>,
    opts: &FixedPointOptions<T>,
    best_response: B,
    forward: F,
) -> Result<MfeSolution<T>>
where
    T: Scalar,
    B: Fn(&MeanFieldTrajectory<T>, usize) -> Result<(ValueTable<T>, PolicyTrajectory<T>)>,
    F: Fn(&PolicyTrajectory<T>) -> Result<MeanFieldTrajectory<T>>,
{
    opts.validate()?;
    let two = T::lit(2.0);
    let mut m = initial;
    let mut history = Vec::new();
    let mut best: Option<Candidate<T>> = None;

    for k in 1..=opts.max_iters {
        let (_, u) = best_response(&m, k)?;
        let m_hat = forward(&u)?;
        let (v_hat, u_next) = best_response(&m_hat, k)?;
        let gap = forward(&u_next)?.sup_l1_distance(&m_hat)?;

        let step = opts.damping * m_hat.sup_l1_distance(&m)?;
        history.push(step);

        let finish = |residual: T, policy, mean_field, values, history| MfeSolution {
            policy,
            mean_field,
            values,
            residual,
            consistency_gap: gap,
            iterations: k,
            converged: true,
            residual_history: history,
            smoothing_temperature: opts.smoothing.map(|s| s.temperature(k)),
            risk_mu: opts.risk_mu,
        };
        if opts.early_exit && gap <= opts.tolerance {
            return Ok(finish(gap, u, m_hat, v_hat, history));
        }
        if step <= opts.tolerance && gap <= two * opts.tolerance {
            return Ok(finish(step, u, m_hat, v_hat, history));
        }

        if best.as_ref().is_none_or(|b| gap < b.gap) {
            best = Some(Candidate {
                policy: u,
                mean_field: m_hat.clone(),
                values: v_hat,
                gap,
            });
        }
        m = if opts.damping == T::one() {
            m_hat
        } else {
            m.damp_toward(&m_hat, opts.damping)?
        };
    }

    let b = best.expect("at least one iteration ran");
    Ok(MfeSolution {
        policy: b.policy,
        mean_field: b.mean_field,
        values: b.values,
        residual: b.gap,
        consistency_gap: b.gap,
        iterations: opts.max_iters,
        converged: false,
        residual_history: history,
        smoothing_temperature: opts.smoothing.map(|s| s.temperature(opts.max_iters)),
        risk_mu: opts.risk_mu,
    })
}

/// Solve the discrete-time mean field game by damped best-response iteration,
/// starting from `m0` held constant over the horizon.
pub fn solve_bsk_fixed_point<T: Scalar>(
    scenario: &ScenarioModel<T>,
    opts: &FixedPointOptions<T>,
) -> Result<MfeSolution<T>> {
    scenario.mode().expect(KernelMode::DiscreteProbability)?;
    let stages = scenario.horizon.steps()?;
    let times = (0..=stages).map(T::from_usize_lossy).collect();
    let initial = MeanFieldTrajectory::constant(times, scenario.m0.clone())?;
    let expectation = match opts.risk_mu {
        Some(mu) => Expectation::CertaintyEquivalent(mu),
        None => Expectation::Linear,
    };
    damped_fixed_point(
        initial,
        opts,
        |m, k| backward_bellman_with(scenario, m, expectation, opts.selection(k)),
        |u| forward_kolmogorov(scenario, u, &scenario.m0),
    )
}
