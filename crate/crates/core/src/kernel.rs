//! Individual transition kernels `q_{xax'}(t, m)` and the population kernel
//! obtained by mixing them with a policy.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// One-step transition probabilities; rows sum to one.
    DiscreteProbability,
    /// Jump-rate generator; off-diagonal rates are nonnegative and rows sum to zero.
    ContinuousRate,
}

impl KernelMode {
    pub fn name(self) -> &'static str {
        match self {
            KernelMode::DiscreteProbability => "discrete-probability",
            KernelMode::ContinuousRate => "continuous-rate",
        }
    }

    pub fn expect(self, expected: KernelMode) -> Result<()> {
        if self == expected {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected: expected.name(),
                found: self.name(),
            })
        }
    }
}

/// Writes the row `x' ↦ q(t, ty, x, a, m)` into the output slice.
pub type RowFn<T> =
    dyn Fn(T, usize, usize, usize, &[SimplexVector<T>], &mut [T]) + Send + Sync + 'static;

/// A black-box kernel together with its mode.
#[derive(Clone)]
pub struct TransitionKernelSpec<T> {
    mode: KernelMode,
    n_states: usize,
    row: Arc<RowFn<T>>,
    mean_field_free: bool,
}

impl<T> fmt::Debug for TransitionKernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransitionKernelSpec")
            .field("mode", &self.mode)
            .field("n_states", &self.n_states)
            .field("mean_field_free", &self.mean_field_free)
            .finish()
    }
}

impl<T: Scalar> TransitionKernelSpec<T> {
    pub fn from_fn<F>(mode: KernelMode, n_states: usize, f: F) -> Self
    where
        F: Fn(T, usize, usize, usize, &[SimplexVector<T>], &mut [T]) + Send + Sync + 'static,
    {
        Self {
            mode,
            n_states,
            row: Arc::new(f),
            mean_field_free: false,
        }
    }

    /// Dense table `table[ty][x][a][x']`, independent of time and the mean field.
    pub fn from_table(mode: KernelMode, table: Vec<Vec<Vec<Vec<T>>>>) -> Result<Self> {
        let n_states = table
            .first()
            .map(|per_state| per_state.len())
            .ok_or_else(|| Error::ShapeMismatch("empty kernel table".into()))?;
        for per_state in &table {
            if per_state.len() != n_states {
                return Err(Error::ShapeMismatch("ragged kernel table".into()));
            }
            for per_action in per_state {
                if per_action.iter().any(|row| row.len() != n_states) {
                    return Err(Error::ShapeMismatch(format!(
                        "kernel rows must have {n_states} entries"
                    )));
                }
            }
        }
        let table = Arc::new(table);
        let mut spec = Self::from_fn(mode, n_states, move |_, ty, x, a, _, out| {
            out.copy_from_slice(&table[ty][x][a]);
        });
        spec.mean_field_free = true;
        Ok(spec)
    }

    /// Marks the kernel as independent of the mean field (enables shortcuts in
    /// the fixed-point solvers).
    pub fn with_mean_field_free(mut self, free: bool) -> Self {
        self.mean_field_free = free;
        self
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn is_mean_field_free(&self) -> bool {
        self.mean_field_free
    }

    pub fn row_into(
        &self,
        t: T,
        ty: usize,
        x: usize,
        a: usize,
        m: &[SimplexVector<T>],
        out: &mut [T],
    ) {
        (self.row)(t, ty, x, a, m, out)
    }

    pub fn row(&self, t: T, ty: usize, x: usize, a: usize, m: &[SimplexVector<T>]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states];
        self.row_into(t, ty, x, a, m, &mut out);
        out
    }

    /// Checks one row against the invariant of this kernel's mode.
    pub fn check_row(&self, row: &[T], t: T, ty: usize, x: usize, a: usize) -> Result<()> {
        check_row(self.mode, row, t, ty, x, a)
    }
}

pub fn check_row<T: Scalar>(
    mode: KernelMode,
    row: &[T],
    t: T,
    ty: usize,
    x: usize,
    a: usize,
) -> Result<()> {
    let clamp = T::lit(T::CLAMP_TOL);
    let tol = T::lit(T::SIMPLEX_TOL);
    for (target, &q) in row.iter().enumerate() {
        if !q.is_finite() {
            return Err(Error::NonFiniteValue {
                stage: 0,
                ty,
                state: x,
            });
        }
        let must_be_nonneg = mode == KernelMode::DiscreteProbability || target != x;
        if must_be_nonneg && q < -clamp {
            return Err(Error::NegativeEntry {
                ty,
                state: x,
                action: a,
                target,
                value: q.to_f64_lossy(),
            });
        }
    }
    let sum: T = row.iter().copied().sum();
    match mode {
        KernelMode::DiscreteProbability => {
            if (sum - T::one()).abs() > tol {
                return Err(Error::KernelNotStochastic {
                    ty,
                    state: x,
                    action: a,
                    t: t.to_f64_lossy(),
                    sum: sum.to_f64_lossy(),
                });
            }
        }
        KernelMode::ContinuousRate => {
            let scale = row.iter().fold(T::one(), |acc, q| acc.max(q.abs()));
            if sum.abs() > tol * scale {
                return Err(Error::GeneratorRowSum {
                    ty,
                    state: x,
                    action: a,
                    t: t.to_f64_lossy(),
                    sum: sum.to_f64_lossy(),
                });
            }
        }
    }
    Ok(())
}

/// Population kernel `ℒ_{xx'} = Σ_a u(a|x)·q_{xax'}(t, m)` for one type.
///
/// `policy[x]` is the action distribution in state `x`. The result inherits the
/// row-sum invariant of the kernel's mode.
pub fn policy_averaged_kernel<T: Scalar>(
    kernel: &TransitionKernelSpec<T>,
    expected: KernelMode,
    ty: usize,
    policy: &[Vec<T>],
    m: &[SimplexVector<T>],
    t: T,
) -> Result<Vec<Vec<T>>> {
    kernel.mode().expect(expected)?;
    let n = kernel.n_states();
    if policy.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "policy covers {} states, kernel has {n}",
            policy.len()
        )));
    }
    let mut row = vec![T::zero(); n];
    let mut out = vec![vec![T::zero(); n]; n];
    for (x, dist) in policy.iter().enumerate() {
        for (a, &p) in dist.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            kernel.row_into(t, ty, x, a, m, &mut row);
            if cfg!(debug_assertions) {
                kernel.check_row(&row, t, ty, x, a)?;
            }
            for (acc, &q) in out[x].iter_mut().zip(&row) {
                *acc += p * q;
            }
        }
    }
    Ok(out)
}
