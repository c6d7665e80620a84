//! Probability vectors over a finite state space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A distribution over the finite state space.
///
/// Construction clamps round-off negatives (above `-T::CLAMP_TOL`) to zero and
/// rejects anything further below zero or any total mass further than
/// `tolerance` from one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector<T> {
    mass: Vec<T>,
    tolerance: T,
}

impl<T: Scalar> SimplexVector<T> {
    pub fn new(mass: Vec<T>) -> Result<Self> {
        Self::with_tolerance(mass, T::lit(T::SIMPLEX_TOL))
    }

    pub fn with_tolerance(mut mass: Vec<T>, tolerance: T) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::ShapeMismatch("empty simplex vector".into()));
        }
        let clamp = T::lit(T::CLAMP_TOL);
        for (index, m) in mass.iter_mut().enumerate() {
            if !m.is_finite() || *m < -clamp {
                return Err(Error::NegativeMass {
                    index,
                    value: m.to_f64_lossy(),
                });
            }
            if *m < T::zero() {
                *m = T::zero();
            }
        }
        let sum: T = mass.iter().copied().sum();
        if (sum - T::one()).abs() > tolerance {
            return Err(Error::NotNormalized {
                sum: sum.to_f64_lossy(),
                tolerance: tolerance.to_f64_lossy(),
            });
        }
        Ok(Self { mass, tolerance })
    }

    /// Clamp negatives and rescale an arbitrary nonnegative-ish vector onto the simplex.
    pub fn project(raw: &[T]) -> Result<Self> {
        let clipped: Vec<T> = raw.iter().map(|&m| m.max(T::zero())).collect();
        let sum: T = clipped.iter().copied().sum();
        if !(sum > T::zero()) || !sum.is_finite() {
            return Err(Error::NotNormalized {
                sum: sum.to_f64_lossy(),
                tolerance: T::SIMPLEX_TOL,
            });
        }
        Self::new(clipped.into_iter().map(|m| m / sum).collect())
    }

    /// Wraps raw masses without validation. Only for integrator stage points and
    /// finite-difference probes, which may sit a round-off away from the simplex.
    pub fn unchecked(mass: Vec<T>) -> Self {
        Self {
            mass,
            tolerance: T::lit(T::SIMPLEX_TOL),
        }
    }

    pub fn uniform(n: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(n);
        Self {
            mass: vec![p; n],
            tolerance: T::lit(T::SIMPLEX_TOL),
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut mass = vec![T::zero(); n];
        mass[at] = T::one();
        Self {
            mass,
            tolerance: T::lit(T::SIMPLEX_TOL),
        }
    }

    /// Uniform draw from the simplex (flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let draws: Vec<f64> = (0..n)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        let mass: Vec<T> = draws.iter().map(|d| T::lit(d / total)).collect();
        Self::project(&mass).expect("dirichlet draw is a distribution")
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.mass
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    pub fn get(&self, x: usize) -> T {
        self.mass[x]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.mass
    }

    /// Σ_x |self(x) − other(x)|.
    pub fn l1_distance(&self, other: &Self) -> T {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    }

    /// Convex combination `(1 − λ)·self + λ·other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "mixing simplex vectors of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(&a, &b)| (T::one() - lambda) * a + lambda * b)
            .collect();
        Self::with_tolerance(mass, self.tolerance)
    }

    /// Σ_x self(x)·f(x).
    pub fn expectation(&self, f: &[T]) -> T {
        self.mass.iter().zip(f).map(|(&m, &v)| m * v).sum()
    }
}

impl<T> std::ops::Index<usize> for SimplexVector<T> {
    type Output = T;
    fn index(&self, x: usize) -> &T {
        &self.mass[x]
    }
}
