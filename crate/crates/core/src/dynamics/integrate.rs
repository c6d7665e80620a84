use serde::{Deserialize, Serialize};

use super::{drift_unchecked, RateKernel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::grid_steps;
use crate::simplex::SimplexVector;
use crate::trajectory::MeanFieldTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub step: T,
    pub horizon: T,
    /// Clamp negatives and rescale onto the simplex after every step.
    pub renormalize: bool,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn rk4(step: T, horizon: T) -> Self {
        Self {
            method: Method::Rk4,
            step,
            horizon,
            renormalize: false,
        }
    }
}

impl<T: Scalar> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self::rk4(T::lit(1e-3), T::one())
    }
}

/// Trajectory plus the raw extremes seen before any clamping.
#[derive(Debug, Clone)]
pub struct ForwardRun<T> {
    pub trajectory: MeanFieldTrajectory<T>,
    /// Smallest raw component over all grid points.
    pub min_mass: T,
    /// Largest `|Σ_x m(x) − 1|` over all grid points.
    pub max_sum_deviation: T,
}

fn velocity<T: Scalar, K: RateKernel<T> + ?Sized>(kernel: &K, m: &[T]) -> Result<Vec<T>> {
    let probe = SimplexVector::unchecked(m.to_vec());
    let rates = kernel.rates(&probe);
    let clamp = T::lit(T::CLAMP_TOL);
    for (from, row) in rates.iter().enumerate() {
        for (to, &r) in row.iter().enumerate() {
            if to != from && r < -clamp {
                return Err(Error::NegativeRate {
                    from,
                    to,
                    value: r.to_f64_lossy(),
                });
            }
        }
    }
    Ok(drift_unchecked(&rates, m))
}

fn axpy<T: Scalar>(m: &[T], h: T, d: &[T]) -> Vec<T> {
    m.iter().zip(d).map(|(&a, &b)| a + h * b).collect()
}

/// Integrates `ṁ = drift(ℒ(m), m)` from `m0` on the uniform grid of `cfg`.
pub fn integrate_forward<T: Scalar, K: RateKernel<T> + ?Sized>(
    kernel: &K,
    m0: &SimplexVector<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<MeanFieldTrajectory<T>> {
    integrate_forward_detailed(kernel, m0, cfg).map(|run| run.trajectory)
}

pub fn integrate_forward_detailed<T: Scalar, K: RateKernel<T> + ?Sized>(
    kernel: &K,
    m0: &SimplexVector<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<ForwardRun<T>> {
    if kernel.n_states() != m0.len() {
        return Err(Error::ShapeMismatch(format!(
            "kernel over {} states, initial profile over {}",
            kernel.n_states(),
            m0.len()
        )));
    }
    let steps = grid_steps(cfg.horizon, cfg.step)?;
    let h = cfg.step;
    let half = h / T::lit(2.0);
    let two = T::lit(2.0);
    let six = T::lit(6.0);

    let mut times = Vec::with_capacity(steps + 1);
    let mut profiles = Vec::with_capacity(steps + 1);
    let mut m = m0.as_slice().to_vec();
    let mut min_mass = m.iter().copied().fold(T::infinity(), T::min);
    let mut max_dev = T::zero();
    times.push(T::zero());
    profiles.push(m0.clone());

    for k in 1..=steps {
        let next = match cfg.method {
            Method::ExplicitEuler => {
                let d = velocity(kernel, &m)?;
                axpy(&m, h, &d)
            }
            Method::Rk4 => {
                let k1 = velocity(kernel, &m)?;
                let k2 = velocity(kernel, &axpy(&m, half, &k1))?;
                let k3 = velocity(kernel, &axpy(&m, half, &k2))?;
                let k4 = velocity(kernel, &axpy(&m, h, &k3))?;
                m.iter()
                    .enumerate()
                    .map(|(i, &v)| v + h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                    .collect()
            }
        };
        let t = T::from_usize_lossy(k) * h;
        if let Some(&bad) = next.iter().find(|v| !(v.abs() <= two)) {
            return Err(Error::StepUnstable {
                t: t.to_f64_lossy(),
                value: bad.to_f64_lossy(),
            });
        }
        min_mass = next.iter().copied().fold(min_mass, T::min);
        let sum: T = next.iter().copied().sum();
        max_dev = max_dev.max((sum - T::one()).abs());
        let profile = if cfg.renormalize {
            SimplexVector::project(&next)?
        } else {
            SimplexVector::with_tolerance(next, m0.tolerance())?
        };
        m = profile.as_slice().to_vec();
        times.push(t);
        profiles.push(profile);
    }
    Ok(ForwardRun {
        trajectory: MeanFieldTrajectory::single(times, profiles)?,
        min_mass,
        max_sum_deviation: max_dev,
    })
}
