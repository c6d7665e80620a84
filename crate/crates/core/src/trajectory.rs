//! Time-indexed policies, mean-field trajectories and value tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;
use crate::space::StateSpace;

/// `stages[t][ty][x][a] = u_t(a | x)` for each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrajectory<T> {
    stages: Vec<Vec<Vec<Vec<T>>>>,
}

impl<T: Scalar> PolicyTrajectory<T> {
    pub fn new(stages: Vec<Vec<Vec<Vec<T>>>>) -> Result<Self> {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        for stage in &stages {
            for per_state in stage {
                for dist in per_state {
                    let sum: T = dist.iter().copied().sum();
                    if dist.iter().any(|&p| p < T::zero()) || (sum - T::one()).abs() > tol {
                        return Err(Error::NotNormalized {
                            sum: sum.to_f64_lossy(),
                            tolerance: tol.to_f64_lossy(),
                        });
                    }
                }
            }
        }
        Ok(Self { stages })
    }

    /// The same stage repeated `len` times.
    pub fn stationary(stage: Vec<Vec<Vec<T>>>, len: usize) -> Result<Self> {
        Self::new(vec![stage; len])
    }

    /// Uniform randomization over the available actions.
    pub fn uniform(space: &StateSpace, len: usize) -> Self {
        let stage: Vec<Vec<Vec<T>>> = (0..space.n_types())
            .map(|ty| crate::scenario::uniform_type_policy(space, ty))
            .collect();
        Self {
            stages: vec![stage; len],
        }
    }

    /// Pure policy from action indices `choice[t][ty][x]`.
    pub fn pure(space: &StateSpace, choice: &[Vec<Vec<usize>>]) -> Self {
        let stages = choice
            .iter()
            .map(|per_type| {
                per_type
                    .iter()
                    .enumerate()
                    .map(|(ty, per_state)| {
                        per_state
                            .iter()
                            .enumerate()
                            .map(|(x, &a)| {
                                let mut d = vec![T::zero(); space.n_actions(ty, x)];
                                d[a] = T::one();
                                d
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { stages }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Per-type, per-state action distributions at stage `t`.
    pub fn stage(&self, t: usize) -> &[Vec<Vec<T>>] {
        &self.stages[t]
    }

    pub fn dist(&self, t: usize, ty: usize, x: usize) -> &[T] {
        &self.stages[t][ty][x]
    }

    pub fn stages(&self) -> &[Vec<Vec<Vec<T>>>] {
        &self.stages
    }

    /// Checks that the policy matches the action sets of `space`.
    pub fn check_shape(&self, space: &StateSpace) -> Result<()> {
        for stage in &self.stages {
            if stage.len() != space.n_types() {
                return Err(Error::ShapeMismatch("policy type count".into()));
            }
            for (ty, per_state) in stage.iter().enumerate() {
                if per_state.len() != space.n_states() {
                    return Err(Error::ShapeMismatch("policy state count".into()));
                }
                for (x, d) in per_state.iter().enumerate() {
                    if d.len() != space.n_actions(ty, x) {
                        return Err(Error::ShapeMismatch(format!(
                            "policy for type {ty} state {x} has {} actions, expected {}",
                            d.len(),
                            space.n_actions(ty, x)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Time grid plus one profile per type at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTrajectory<T> {
    times: Vec<T>,
    profiles: Vec<Vec<SimplexVector<T>>>,
}

impl<T: Scalar> MeanFieldTrajectory<T> {
    pub fn new(times: Vec<T>, profiles: Vec<Vec<SimplexVector<T>>>) -> Result<Self> {
        if times.len() != profiles.len() || times.is_empty() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} profiles",
                times.len(),
                profiles.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("time grid not strictly increasing".into()));
        }
        Ok(Self { times, profiles })
    }

    /// The same profile held at every grid point.
    pub fn constant(times: Vec<T>, profile: Vec<SimplexVector<T>>) -> Result<Self> {
        let profiles = vec![profile; times.len()];
        Self::new(times, profiles)
    }

    /// Single-type trajectory.
    pub fn single(times: Vec<T>, profiles: Vec<SimplexVector<T>>) -> Result<Self> {
        Self::new(times, profiles.into_iter().map(|p| vec![p]).collect())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// All type profiles at grid index `k`.
    pub fn at(&self, k: usize) -> &[SimplexVector<T>] {
        &self.profiles[k]
    }

    pub fn profile(&self, k: usize, ty: usize) -> &SimplexVector<T> {
        &self.profiles[k][ty]
    }

    pub fn last(&self) -> &[SimplexVector<T>] {
        self.profiles.last().expect("trajectory is nonempty")
    }

    /// sup over grid points of the (type-summed) L1 distance.
    pub fn sup_l1_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "trajectories of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .profiles
            .iter()
            .zip(&other.profiles)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.l1_distance(q)).sum::<T>())
            .fold(T::zero(), T::max))
    }

    /// Pointwise damped update `(1 − λ)·self + λ·target`.
    pub fn damp_toward(&self, target: &Self, lambda: T) -> Result<Self> {
        if self.len() != target.len() {
            return Err(Error::GridMismatch("damping across different grids".into()));
        }
        let profiles = self
            .profiles
            .iter()
            .zip(&target.profiles)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.mix(q, lambda)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::new(self.times.clone(), profiles)
    }

    /// Linear interpolation in time of all type profiles (clamped to the grid).
    pub fn interpolate(&self, t: T) -> Vec<SimplexVector<T>> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.profiles[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.profiles[n - 1].clone();
        }
        let k = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"))
        {
            Ok(k) => return self.profiles[k].clone(),
            Err(k) => k - 1,
        };
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.profiles[k]
            .iter()
            .zip(&self.profiles[k + 1])
            .map(|(a, b)| a.mix(b, w).expect("mix of valid profiles"))
            .collect()
    }
}

/// `values[k][ty][x]` along a fixed mean-field trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable<T> {
    values: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn new(values: Vec<Vec<Vec<T>>>) -> Self {
        Self { values }
    }

    pub fn at(&self, k: usize) -> &[Vec<T>] {
        &self.values[k]
    }

    pub fn get(&self, k: usize, ty: usize, x: usize) -> T {
        self.values[k][ty][x]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn initial(&self) -> &[Vec<T>] {
        &self.values[0]
    }

    pub fn rows(&self) -> &[Vec<Vec<T>>] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_rows_must_sum_to_one() {
        assert!(PolicyTrajectory::<f64>::new(vec![vec![vec![vec![0.5, 0.4]]]]).is_err());
        assert!(PolicyTrajectory::<f64>::new(vec![vec![vec![vec![0.5, 0.5]]]]).is_ok());
    }

    #[test]
    fn grid_must_increase() {
        let p = vec![SimplexVector::<f64>::uniform(2)];
        assert!(MeanFieldTrajectory::constant(vec![0.0, 0.0], p.clone()).is_err());
        assert!(MeanFieldTrajectory::constant(vec![0.0, 1.0], p).is_ok());
    }

    #[test]
    fn interpolation_is_linear() {
        let a: SimplexVector<f64> = SimplexVector::point_mass(2, 0);
        let b = SimplexVector::point_mass(2, 1);
        let tr = MeanFieldTrajectory::single(vec![0.0, 1.0], vec![a, b]).unwrap();
        let mid = tr.interpolate(0.25);
        assert!((mid[0][0] - 0.75).abs() < 1e-15);
    }
}
