//! Validated bundle of spaces, kernels, payoffs, horizon and initial profile.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{KernelMode, TransitionKernelSpec};
use crate::payoff::PayoffSpec;
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;
use crate::space::StateSpace;

/// Seed of the random simplex probes used by [`ScenarioModel::validate`].
pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_0f_9b0be5;
/// Number of random simplex probes per validation.
pub const PROBE_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon<T> {
    /// Stages `0..stages`, terminal payoff at `stages`.
    Discrete { stages: usize },
    /// Interval `[0, end]` on a uniform grid of width `step`.
    Continuous { end: T, step: T },
}

impl<T: Scalar> Horizon<T> {
    pub fn mode(&self) -> KernelMode {
        match self {
            Horizon::Discrete { .. } => KernelMode::DiscreteProbability,
            Horizon::Continuous { .. } => KernelMode::ContinuousRate,
        }
    }

    /// Number of steps on the grid (stages, or intervals of width `step`).
    pub fn steps(&self) -> Result<usize> {
        match *self {
            Horizon::Discrete { stages } => Ok(stages),
            Horizon::Continuous { end, step } => grid_steps(end, step),
        }
    }

    /// End time (`stages` as a scalar in discrete mode).
    pub fn end(&self) -> T {
        match *self {
            Horizon::Discrete { stages } => T::from_usize_lossy(stages),
            Horizon::Continuous { end, .. } => end,
        }
    }
}

/// Number of uniform steps of width `step` covering `[0, end]`; errors when
/// `end / step` is not integral.
pub fn grid_steps<T: Scalar>(end: T, step: T) -> Result<usize> {
    if !(step > T::zero()) || !(end > T::zero()) || step > end {
        return Err(Error::InvalidParameter(format!(
            "need 0 < step <= horizon, got step {step} horizon {end}"
        )));
    }
    let ratio = (end / step).to_f64_lossy();
    let n = ratio.round();
    if (ratio - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "horizon {end} is not a multiple of step {step}"
        )));
    }
    Ok(n as usize)
}

/// Explicit mean-field drift `f̃_t(u, m)` for one type: `(t, ty, policy[x][a], m)`.
pub type DriftFn<T> =
    dyn Fn(T, usize, &[Vec<T>], &[SimplexVector<T>]) -> Vec<T> + Send + Sync + 'static;

#[derive(Clone)]
pub struct ScenarioModel<T> {
    pub name: String,
    pub space: StateSpace,
    pub kernel: TransitionKernelSpec<T>,
    pub payoff: PayoffSpec<T>,
    pub horizon: Horizon<T>,
    pub m0: Vec<SimplexVector<T>>,
    /// Population share of each type.
    pub type_mass: Vec<T>,
    drift: Option<Arc<DriftFn<T>>>,
    /// Per-player revision clock rate used by the continuous-time n-player simulator.
    pub clock_rate: Option<f64>,
}

impl<T> fmt::Debug for ScenarioModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScenarioModel")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("kernel", &self.kernel)
            .field("explicit_drift", &self.drift.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ScenarioModel<T> {
    /// Assembles and validates a scenario with the default probe seed.
    pub fn new(
        name: impl Into<String>,
        space: StateSpace,
        kernel: TransitionKernelSpec<T>,
        payoff: PayoffSpec<T>,
        horizon: Horizon<T>,
        m0: Vec<SimplexVector<T>>,
        type_mass: Vec<T>,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            space,
            kernel,
            payoff,
            horizon,
            m0,
            type_mass,
            drift: None,
            clock_rate: None,
        };
        s.validate(DEFAULT_PROBE_SEED)?;
        Ok(s)
    }

    /// Single-type convenience constructor.
    pub fn single_type(
        name: impl Into<String>,
        space: StateSpace,
        kernel: TransitionKernelSpec<T>,
        payoff: PayoffSpec<T>,
        horizon: Horizon<T>,
        m0: SimplexVector<T>,
    ) -> Result<Self> {
        Self::new(name, space, kernel, payoff, horizon, vec![m0], vec![T::one()])
    }

    pub fn with_clock_rate(mut self, rate: f64) -> Self {
        self.clock_rate = Some(rate);
        self
    }

    /// Attaches an explicit mean-field drift; it must agree with the
    /// generator-induced drift at the probe points.
    pub fn with_drift<F>(mut self, drift: F) -> Result<Self>
    where
        F: Fn(T, usize, &[Vec<T>], &[SimplexVector<T>]) -> Vec<T> + Send + Sync + 'static,
    {
        self.drift = Some(Arc::new(drift));
        self.check_drift(DEFAULT_PROBE_SEED)?;
        Ok(self)
    }

    pub fn explicit_drift(&self) -> Option<&DriftFn<T>> {
        self.drift.as_deref()
    }

    pub fn mode(&self) -> KernelMode {
        self.kernel.mode()
    }

    pub fn n_states(&self) -> usize {
        self.space.n_states()
    }

    pub fn n_types(&self) -> usize {
        self.space.n_types()
    }

    pub fn is_mean_field_free(&self) -> bool {
        self.kernel.is_mean_field_free() && self.payoff.is_mean_field_free()
    }

    /// Replaces the payoff (used by invariance studies); kernel and shapes are kept.
    pub fn with_payoff(&self, payoff: PayoffSpec<T>) -> Self {
        let mut s = self.clone();
        s.payoff = payoff;
        s
    }

    /// Probe points: the initial profile plus `PROBE_POINTS` random per-type profiles.
    pub fn probe_profiles(&self, seed: u64) -> Vec<Vec<SimplexVector<T>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = vec![self.m0.clone()];
        for _ in 0..PROBE_POINTS {
            probes.push(
                (0..self.n_types())
                    .map(|_| SimplexVector::random(self.n_states(), &mut rng))
                    .collect(),
            );
        }
        probes
    }

    fn probe_times(&self) -> Vec<T> {
        match self.horizon {
            Horizon::Discrete { stages } => {
                let last = stages.saturating_sub(1);
                vec![T::zero(), T::from_usize_lossy(last)]
            }
            Horizon::Continuous { end, .. } => vec![T::zero(), end / T::lit(2.0)],
        }
    }

    /// Shape, mode and kernel-invariant checks at `m0` and random probes.
    pub fn validate(&self, probe_seed: u64) -> Result<()> {
        let n = self.n_states();
        let types = self.n_types();
        if self.kernel.n_states() != n {
            return Err(Error::ShapeMismatch(format!(
                "kernel has {} states, state space has {n}",
                self.kernel.n_states()
            )));
        }
        if self.m0.len() != types || self.type_mass.len() != types {
            return Err(Error::ShapeMismatch(format!(
                "expected {types} initial profiles and type masses, got {} and {}",
                self.m0.len(),
                self.type_mass.len()
            )));
        }
        if let Some(bad) = self.m0.iter().find(|m| m.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "initial profile has {} entries, expected {n}",
                bad.len()
            )));
        }
        SimplexVector::new(self.type_mass.clone())?;
        if self.horizon.mode() != self.kernel.mode() {
            return Err(Error::ModeMismatch {
                expected: self.horizon.mode().name(),
                found: self.kernel.mode().name(),
            });
        }
        if self.horizon.steps()? == 0 && matches!(self.horizon, Horizon::Continuous { .. }) {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }

        let mut row = vec![T::zero(); n];
        for m in self.probe_profiles(probe_seed) {
            for &t in &self.probe_times() {
                for ty in 0..types {
                    for x in 0..n {
                        for a in 0..self.space.n_actions(ty, x) {
                            self.kernel.row_into(t, ty, x, a, &m, &mut row);
                            self.kernel.check_row(&row, t, ty, x, a)?;
                            if !self.payoff.reward(t, ty, x, a, &m).is_finite() {
                                return Err(Error::NonFiniteValue { stage: 0, ty, state: x });
                            }
                        }
                        if !self.payoff.terminal(ty, x, &m).is_finite() {
                            return Err(Error::NonFiniteValue { stage: 0, ty, state: x });
                        }
                    }
                }
            }
        }
        if self.drift.is_some() {
            self.check_drift(probe_seed)?;
        }
        Ok(())
    }

    /// Drift induced by the generator: `ṁ(x') = Σ_x m(x) Σ_a u(a|x) q̄_{xax'}(m)`.
    pub fn generator_drift(
        &self,
        t: T,
        ty: usize,
        policy: &[Vec<T>],
        m: &[SimplexVector<T>],
    ) -> Vec<T> {
        let n = self.n_states();
        let mut out = vec![T::zero(); n];
        let mut row = vec![T::zero(); n];
        for x in 0..n {
            let mx = m[ty][x];
            if mx == T::zero() {
                continue;
            }
            for (a, &p) in policy[x].iter().enumerate() {
                if p == T::zero() {
                    continue;
                }
                self.kernel.row_into(t, ty, x, a, m, &mut row);
                for (o, &q) in out.iter_mut().zip(&row) {
                    *o += mx * p * q;
                }
            }
        }
        out
    }

    /// Mean-field drift used by the forward equation: the explicit `f̃` when
    /// supplied, otherwise the generator-induced drift.
    pub fn mean_field_velocity(
        &self,
        t: T,
        ty: usize,
        policy: &[Vec<T>],
        m: &[SimplexVector<T>],
    ) -> Vec<T> {
        match &self.drift {
            Some(f) => f(t, ty, policy, m),
            None => self.generator_drift(t, ty, policy, m),
        }
    }

    fn check_drift(&self, seed: u64) -> Result<()> {
        let Some(f) = &self.drift else { return Ok(()) };
        if self.mode() != KernelMode::ContinuousRate {
            return Err(Error::ModeMismatch {
                expected: KernelMode::ContinuousRate.name(),
                found: self.mode().name(),
            });
        }
        let tol = T::lit(1e-8);
        for m in self.probe_profiles(seed) {
            for ty in 0..self.n_types() {
                let policy = uniform_type_policy(&self.space, ty);
                let explicit = f(T::zero(), ty, &policy, &m);
                let induced = self.generator_drift(T::zero(), ty, &policy, &m);
                let gap = explicit
                    .iter()
                    .zip(&induced)
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(T::zero(), T::max);
                if gap > tol {
                    return Err(Error::DriftGeneratorMismatch {
                        gap: gap.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Uniform action distribution in every state of one type.
pub fn uniform_type_policy<T: Scalar>(space: &StateSpace, ty: usize) -> Vec<Vec<T>> {
    (0..space.n_states())
        .map(|x| {
            let k = space.n_actions(ty, x);
            vec![T::one() / T::from_usize_lossy(k); k]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space2() -> StateSpace {
        StateSpace::simple(&["a", "b"], &["only"]).unwrap()
    }

    fn build(mode: KernelMode, rows: Vec<Vec<f64>>) -> Result<ScenarioModel<f64>> {
        let kernel = TransitionKernelSpec::from_table(
            mode,
            vec![rows.into_iter().map(|r| vec![r]).collect()],
        )?;
        let horizon = match mode {
            KernelMode::DiscreteProbability => Horizon::Discrete { stages: 3 },
            KernelMode::ContinuousRate => Horizon::Continuous { end: 1.0, step: 0.1 },
        };
        ScenarioModel::single_type(
            "t",
            space2(),
            kernel,
            PayoffSpec::from_tables(vec![vec![vec![0.0]; 2]], vec![vec![0.0; 2]]),
            horizon,
            SimplexVector::uniform(2),
        )
    }

    #[test]
    fn accepts_stochastic_matrix() {
        build(KernelMode::DiscreteProbability, vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
    }

    #[test]
    fn accepts_generator_with_zero_row_sum() {
        build(KernelMode::ContinuousRate, vec![vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
    }

    #[test]
    fn rejects_bad_generator_row() {
        let err = build(KernelMode::ContinuousRate, vec![vec![-1.0, 0.5], vec![0.0, 0.0]])
            .unwrap_err();
        assert!(matches!(err, Error::GeneratorRowSum { .. }));
    }

    #[test]
    fn rejects_bad_stochastic_row() {
        let err = build(KernelMode::DiscreteProbability, vec![vec![0.5, 0.4], vec![0.0, 1.0]])
            .unwrap_err();
        assert!(matches!(err, Error::KernelNotStochastic { .. }));
    }

    #[test]
    fn probes_are_deterministic() {
        let s = build(KernelMode::DiscreteProbability, vec![vec![0.5, 0.5], vec![0.0, 1.0]])
            .unwrap();
        assert_eq!(s.probe_profiles(7), s.probe_profiles(7));
        assert_eq!(s.probe_profiles(7).len(), PROBE_POINTS + 1);
    }

    #[test]
    fn grid_steps_requires_integral_ratio() {
        assert_eq!(grid_steps(1.0_f64, 0.001).unwrap(), 1000);
        assert!(grid_steps(1.0_f64, 0.3).is_err());
    }

    #[test]
    fn explicit_drift_must_match_generator() {
        let s = build(KernelMode::ContinuousRate, vec![vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let ok = s.clone().with_drift(|_, _, _, m| vec![-m[0][0], m[0][0]]);
        assert!(ok.is_ok());
        let bad = s.with_drift(|_, _, _, m| vec![-2.0 * m[0][0], 2.0 * m[0][0]]);
        assert!(matches!(bad, Err(Error::DriftGeneratorMismatch { .. })));
    }
}
