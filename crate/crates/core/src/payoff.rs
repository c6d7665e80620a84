//! Instantaneous and terminal payoffs, and the pairwise (weak coupling) form.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// `r_t(ty, x, a, m)`.
pub type RewardFn<T> = dyn Fn(T, usize, usize, usize, &[SimplexVector<T>]) -> T + Send + Sync;
/// `g_T(ty, x, m)`.
pub type TerminalFn<T> = dyn Fn(usize, usize, &[SimplexVector<T>]) -> T + Send + Sync;

/// Pairwise payoff `r̄(x, a, w)` against an opponent in state `w`, per type.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwisePayoff<T> {
    /// `running[ty][x][a][w]`
    pub running: Vec<Vec<Vec<Vec<T>>>>,
    /// `terminal[ty][x][w]`; zero when absent.
    pub terminal: Option<Vec<Vec<Vec<T>>>>,
}

/// `r(x, a, m) = Σ_w r̄(x, a, w)·m(w)` for every `(x, a)` of one type.
pub fn reduce_pairwise_payoff<T: Scalar>(
    pairwise: &[Vec<Vec<T>>],
    m: &SimplexVector<T>,
) -> Result<Vec<Vec<T>>> {
    pairwise
        .iter()
        .map(|per_action| {
            per_action
                .iter()
                .map(|row| {
                    if row.len() != m.len() {
                        Err(Error::ShapeMismatch(format!(
                            "pairwise payoff has {} opponent states, mean field has {}",
                            row.len(),
                            m.len()
                        )))
                    } else {
                        Ok(m.expectation(row))
                    }
                })
                .collect()
        })
        .collect()
}

/// Population-weighted aggregate `Σ_θ ρ_θ m_θ` of per-type profiles.
pub fn aggregate<T: Scalar>(profiles: &[SimplexVector<T>], type_mass: &[T]) -> SimplexVector<T> {
    if profiles.len() == 1 {
        return profiles[0].clone();
    }
    let n = profiles[0].len();
    let mut acc = vec![T::zero(); n];
    for (p, &rho) in profiles.iter().zip(type_mass) {
        for (a, &m) in acc.iter_mut().zip(p.as_slice()) {
            *a += rho * m;
        }
    }
    SimplexVector::project(&acc).expect("mixture of distributions is a distribution")
}

#[derive(Clone)]
pub struct PayoffSpec<T> {
    instantaneous: Arc<RewardFn<T>>,
    terminal: Arc<TerminalFn<T>>,
    pairwise: Option<Arc<PairwisePayoff<T>>>,
    mean_field_free: bool,
}

impl<T> fmt::Debug for PayoffSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PayoffSpec")
            .field("pairwise", &self.pairwise.is_some())
            .field("mean_field_free", &self.mean_field_free)
            .finish()
    }
}

impl<T: Scalar> PayoffSpec<T> {
    pub fn from_fns<R, G>(instantaneous: R, terminal: G) -> Self
    where
        R: Fn(T, usize, usize, usize, &[SimplexVector<T>]) -> T + Send + Sync + 'static,
        G: Fn(usize, usize, &[SimplexVector<T>]) -> T + Send + Sync + 'static,
    {
        Self {
            instantaneous: Arc::new(instantaneous),
            terminal: Arc::new(terminal),
            pairwise: None,
            mean_field_free: false,
        }
    }

    /// Tables `running[ty][x][a]` and `terminal[ty][x]`, independent of `m`.
    pub fn from_tables(running: Vec<Vec<Vec<T>>>, terminal: Vec<Vec<T>>) -> Self {
        let running = Arc::new(running);
        let terminal = Arc::new(terminal);
        let mut spec = Self::from_fns(
            move |_, ty, x, a, _| running[ty][x][a],
            move |ty, x, _| terminal[ty][x],
        );
        spec.mean_field_free = true;
        spec
    }

    /// Builds the instantaneous payoff from its pairwise form; opponents are
    /// drawn from the type-mass weighted aggregate profile.
    pub fn from_pairwise(pairwise: PairwisePayoff<T>, type_mass: Vec<T>) -> Self {
        let pw = Arc::new(pairwise);
        let run = Arc::clone(&pw);
        let rho = Arc::new(type_mass);
        let rho_t = Arc::clone(&rho);
        let term = Arc::clone(&pw);
        Self {
            instantaneous: Arc::new(move |_, ty, x, a, m| {
                let agg = aggregate(m, &rho);
                agg.expectation(&run.running[ty][x][a])
            }),
            terminal: Arc::new(move |ty, x, m| match &term.terminal {
                Some(tab) => aggregate(m, &rho_t).expectation(&tab[ty][x]),
                None => T::zero(),
            }),
            pairwise: Some(pw),
            mean_field_free: false,
        }
    }

    /// Population-game payoff `r_x(m) = max_a r(0, x, a, m)` of type `ty`, with
    /// every type at the profile `m`.
    pub fn population_payoff(
        &self,
        space: &crate::space::StateSpace,
        ty: usize,
    ) -> crate::dynamics::PopulationPayoff<T> {
        let spec = self.clone();
        let counts: Vec<usize> = (0..space.n_states()).map(|x| space.n_actions(ty, x)).collect();
        let types = space.n_types();
        Arc::new(move |m: &SimplexVector<T>| {
            let profiles = vec![m.clone(); types];
            counts
                .iter()
                .enumerate()
                .map(|(x, &k)| {
                    (0..k)
                        .map(|a| spec.reward(T::zero(), ty, x, a, &profiles))
                        .fold(T::neg_infinity(), T::max)
                })
                .collect()
        })
    }

    pub fn with_mean_field_free(mut self, free: bool) -> Self {
        self.mean_field_free = free;
        self
    }

    pub fn is_mean_field_free(&self) -> bool {
        self.mean_field_free
    }

    pub fn pairwise(&self) -> Option<&PairwisePayoff<T>> {
        self.pairwise.as_deref()
    }

    #[inline]
    pub fn reward(&self, t: T, ty: usize, x: usize, a: usize, m: &[SimplexVector<T>]) -> T {
        (self.instantaneous)(t, ty, x, a, m)
    }

    #[inline]
    pub fn terminal(&self, ty: usize, x: usize, m: &[SimplexVector<T>]) -> T {
        (self.terminal)(ty, x, m)
    }

    /// Same payoff with every running reward shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        let inner = Arc::clone(&self.instantaneous);
        Self {
            instantaneous: Arc::new(move |t, ty, x, a, m| inner(t, ty, x, a, m) + c),
            terminal: Arc::clone(&self.terminal),
            pairwise: None,
            mean_field_free: self.mean_field_free,
        }
    }

    /// Same payoff with running and terminal rewards multiplied by `alpha`.
    pub fn scaled(&self, alpha: T) -> Self {
        let inner = Arc::clone(&self.instantaneous);
        let term = Arc::clone(&self.terminal);
        Self {
            instantaneous: Arc::new(move |t, ty, x, a, m| alpha * inner(t, ty, x, a, m)),
            terminal: Arc::new(move |ty, x, m| alpha * term(ty, x, m)),
            pairwise: None,
            mean_field_free: self.mean_field_free,
        }
    }
}
