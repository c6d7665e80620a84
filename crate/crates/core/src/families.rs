//! Built-in parametric kernel families.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{protocol_to_kernel, PopulationPayoff, ProtocolKind, RateKernel, RevisionProtocol};
use crate::error::{Error, Result};
use crate::kernel::{KernelMode, TransitionKernelSpec};
use crate::payoff::aggregate;
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// Rates of a revision protocol plus uniform mutation at total rate
/// `mutation`, as a continuous-time kernel. Every action of a state shares
/// the same row; the payoff is evaluated at the type-0 profile.
pub fn revision_kernel<T: Scalar>(
    kind: ProtocolKind<T>,
    payoff: PopulationPayoff<T>,
    mutation: T,
    n_states: usize,
) -> Result<TransitionKernelSpec<T>> {
    if !(mutation >= T::zero()) {
        return Err(Error::InvalidParameter(format!("mutation rate {mutation} is negative")));
    }
    let kernel = protocol_to_kernel(RevisionProtocol::new(kind, payoff, n_states))?;
    let each = if n_states > 1 {
        mutation / T::from_usize_lossy(n_states - 1)
    } else {
        T::zero()
    };
    Ok(TransitionKernelSpec::from_fn(
        KernelMode::ContinuousRate,
        n_states,
        move |_, _, x, _, m, out| {
            let rates = kernel.rates(&m[0]);
            let mut total = T::zero();
            for (y, o) in out.iter_mut().enumerate() {
                if y != x {
                    *o = rates[x][y] + each;
                    total += *o;
                }
            }
            out[x] = -total;
        },
    ))
}

/// Kernel `q(m) = base + Σ_w slope[..][w]·m̄(w)` with `m̄` the type-mass
/// weighted aggregate. In continuous mode the diagonal is recomputed so each
/// row sums to zero. Tables are indexed `[ty][x][a][x']` and `[ty][x][a][x'][w]`.
pub fn affine_kernel<T: Scalar>(
    mode: KernelMode,
    base: Vec<Vec<Vec<Vec<T>>>>,
    slope: Vec<Vec<Vec<Vec<Vec<T>>>>>,
    type_mass: Vec<T>,
) -> Result<TransitionKernelSpec<T>> {
    let n = base
        .first()
        .and_then(|t| t.first())
        .and_then(|x| x.first())
        .map(Vec::len)
        .ok_or_else(|| Error::ShapeMismatch("empty affine kernel".into()))?;
    let free = slope
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .all(|w| w.iter().all(|&s| s == T::zero()));
    let kernel = TransitionKernelSpec::from_fn(mode, n, move |_, ty, x, a, m, out| {
        let agg = aggregate(m, &type_mass);
        let mut off = T::zero();
        for (y, o) in out.iter_mut().enumerate() {
            *o = base[ty][x][a][y] + agg.expectation(&slope[ty][x][a][y]);
            if y != x {
                off += *o;
            }
        }
        if mode == KernelMode::ContinuousRate {
            out[x] = -off;
        }
    });
    Ok(kernel.with_mean_field_free(free))
}

/// How a node's success probability is computed from the population profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsmaLimit {
    /// `Π_z (1 − p_z)^{n·m(z) − 1[z = x]}`: no other of the `n − 1` nodes attempts.
    Product,
    /// `exp(−n·Σ_z p_z m(z))`, the large-`n` limit of the product.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsmaParams<T> {
    pub gamma: T,
    pub beta2: T,
    pub beta3: T,
    /// Largest backoff index; states are `0..=k`.
    pub k: usize,
    /// Attempt policy `u_x ∈ [0, 1]` per backoff state.
    pub attempt: Vec<T>,
}

impl<T: Scalar> CsmaParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("gamma", self.gamma), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !(v >= T::zero()) {
                return Err(Error::InvalidParameter(format!("{what} = {v} must be nonnegative")));
            }
        }
        if self.attempt.len() != self.k + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} attempt probabilities for {} backoff states",
                self.attempt.len(),
                self.k + 1
            )));
        }
        for (x, &u) in self.attempt.iter().enumerate() {
            if !(u >= T::zero() && u <= T::one()) {
                return Err(Error::InvalidProbability {
                    what: format!("attempt policy u[{x}]"),
                    value: u.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// `p_x = u_x / (γn + β₂ + β₃ ln n)`.
    pub fn attempt_probabilities(&self, n: usize) -> Result<Vec<T>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("node count must be positive".into()));
        }
        let nn = T::from_usize_lossy(n);
        let denom = self.gamma * nn + self.beta2 + self.beta3 * nn.ln();
        if !(denom > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "attempt scaling γn + β₂ + β₃ ln n = {denom} must be positive"
            )));
        }
        self.attempt
            .iter()
            .enumerate()
            .map(|(x, &u)| {
                let p = u / denom;
                if p >= T::zero() && p <= T::one() {
                    Ok(p)
                } else {
                    Err(Error::InvalidProbability {
                        what: format!("attempt probability p[{x}]"),
                        value: p.to_f64_lossy(),
                    })
                }
            })
            .collect()
    }

    /// Backoff state after a failed attempt from `x`.
    pub fn after_failure(&self, x: usize) -> usize {
        (x + 1) % (self.k + 1)
    }

    /// Probability that a node in state `x` succeeds when it attempts.
    pub fn success_probability(&self, p: &[T], n: usize, x: usize, m: &SimplexVector<T>, limit: CsmaLimit) -> T {
        let nn = T::from_usize_lossy(n);
        match limit {
            CsmaLimit::Exponential => {
                let load: T = p.iter().zip(m.as_slice()).map(|(&pz, &mz)| pz * mz).sum();
                (-nn * load).exp()
            }
            CsmaLimit::Product => {
                let mut log_s = T::zero();
                for (z, (&pz, &mz)) in p.iter().zip(m.as_slice()).enumerate() {
                    let mut others = nn * mz;
                    if z == x {
                        others -= T::one();
                    }
                    let others = others.max(T::zero());
                    if pz >= T::one() {
                        if others > T::lit(0.5) {
                            return T::zero();
                        }
                    } else {
                        log_s += others * (-pz).ln_1p();
                    }
                }
                log_s.exp()
            }
        }
    }
}

/// Discrete-time backoff kernel with a single action per state.
pub fn csma_kernel<T: Scalar>(
    params: &CsmaParams<T>,
    n: usize,
    limit: CsmaLimit,
) -> Result<TransitionKernelSpec<T>> {
    let p = params.attempt_probabilities(n)?;
    let params = Arc::new(params.clone());
    Ok(TransitionKernelSpec::from_fn(
        KernelMode::DiscreteProbability,
        params.k + 1,
        move |_, ty, x, _, m, out| {
            let s = params.success_probability(&p, n, x, &m[ty], limit);
            out.iter_mut().for_each(|o| *o = T::zero());
            out[x] += T::one() - p[x];
            out[0] += p[x] * s;
            out[params.after_failure(x)] += p[x] * (T::one() - s);
        },
    ))
}
