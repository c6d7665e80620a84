use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::scalar::{argmax_first, Scalar};
use crate::scenario::{grid_steps, ScenarioModel};
use crate::simplex::SimplexVector;

/// Largest state count supported by [`SimplexGrid`].
pub const MAX_GRID_STATES: usize = 4;

/// All points of the simplex whose coordinates are multiples of `1/k`.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    k: usize,
    n: usize,
    points: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for c in (0..=total).rev() {
        prefix.push(c);
        compositions(total - c, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl SimplexGrid {
    pub fn new(n_states: usize, k: usize) -> Result<Self> {
        if n_states > MAX_GRID_STATES {
            return Err(Error::StateTooLarge(n_states));
        }
        if n_states == 0 || k == 0 {
            return Err(Error::InvalidParameter(
                "simplex grid needs at least one state and resolution k >= 1".into(),
            ));
        }
        let mut points = Vec::new();
        compositions(k, n_states, &mut Vec::new(), &mut points);
        let index = points.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Ok(Self {
            k,
            n: n_states,
            points,
            index,
        })
    }

    /// `C(k + n − 1, n − 1)`.
    pub fn expected_len(n_states: usize, k: usize) -> usize {
        (1..n_states).fold(1usize, |acc, i| acc * (k + i) / i)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.k
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Integer counts `k·m` of grid point `i`.
    pub fn counts(&self, i: usize) -> &[usize] {
        &self.points[i]
    }

    pub fn point<T: Scalar>(&self, i: usize) -> SimplexVector<T> {
        let k = T::from_usize_lossy(self.k);
        SimplexVector::unchecked(self.points[i].iter().map(|&c| T::from_usize_lossy(c) / k).collect())
    }

    pub fn index_of(&self, counts: &[usize]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Vertices and weights of the Freudenthal simplex containing `m`.
    pub fn barycentric<T: Scalar>(&self, m: &[T]) -> Vec<(usize, T)> {
        let d = self.n - 1;
        if d == 0 {
            return vec![(0, T::one())];
        }
        let kk = T::from_usize_lossy(self.k);
        let mut z = Vec::with_capacity(d);
        let mut acc = T::zero();
        for &mi in &m[..d] {
            acc += mi;
            let prev = z.last().copied().unwrap_or(T::zero());
            z.push((kk * acc).max(prev).min(kk).max(T::zero()));
        }
        let base: Vec<usize> = z
            .iter()
            .map(|&zi| zi.floor().to_f64_lossy() as usize)
            .map(|b| b.min(self.k))
            .collect();
        let frac: Vec<T> = z
            .iter()
            .zip(&base)
            .map(|(&zi, &b)| zi - T::from_usize_lossy(b))
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| {
            frac[j]
                .partial_cmp(&frac[i])
                .expect("finite coordinates")
                .then(j.cmp(&i))
        });
        let mut vertex = base.clone();
        let mut out = Vec::with_capacity(d + 1);
        let push = |v: &[usize], w: T, out: &mut Vec<(usize, T)>| {
            if w > T::zero() {
                let counts = self.cumulative_to_counts(v);
                let i = self
                    .index_of(&counts)
                    .expect("positive-weight vertex lies on the grid");
                out.push((i, w));
            }
        };
        push(&vertex, T::one() - frac[order[0]], &mut out);
        for j in 0..d {
            vertex[order[j]] += 1;
            let next = if j + 1 < d { frac[order[j + 1]] } else { T::zero() };
            push(&vertex, frac[order[j]] - next, &mut out);
        }
        out
    }

    fn cumulative_to_counts(&self, z: &[usize]) -> Vec<usize> {
        let mut counts = Vec::with_capacity(self.n);
        let mut prev = 0;
        for &zi in z {
            counts.push(zi - prev);
            prev = zi;
        }
        counts.push(self.k - prev);
        counts
    }

    /// Piecewise-linear interpolation of grid `values` at `m`.
    pub fn interpolate<T: Scalar>(&self, values: &[T], m: &[T]) -> T {
        self.barycentric(m)
            .into_iter()
            .map(|(i, w)| w * values[i])
            .sum()
    }
}

type PlannerReward<T> = dyn Fn(T, usize, &SimplexVector<T>) -> T + Send + Sync;
type PlannerDrift<T> = dyn Fn(T, usize, &SimplexVector<T>) -> Vec<T> + Send + Sync;
type PlannerTerminal<T> = dyn Fn(&SimplexVector<T>) -> T + Send + Sync;

/// Deterministic control of the population profile with a finite control set:
/// maximize `ḡ(m_T) + ∫ r̄_t(u_t, m_t) dt` subject to `ṁ = f̃_t(u_t, m_t)`.
#[derive(Clone)]
pub struct PlannerProblem<T> {
    pub n_states: usize,
    pub controls: Vec<String>,
    pub horizon: T,
    reward: Arc<PlannerReward<T>>,
    drift: Arc<PlannerDrift<T>>,
    terminal: Arc<PlannerTerminal<T>>,
}

impl<T> fmt::Debug for PlannerProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlannerProblem")
            .field("n_states", &self.n_states)
            .field("controls", &self.controls)
            .finish()
    }
}

impl<T: Scalar> PlannerProblem<T> {
    pub fn new<R, F, G>(
        n_states: usize,
        controls: Vec<String>,
        horizon: T,
        reward: R,
        drift: F,
        terminal: G,
    ) -> Self
    where
        R: Fn(T, usize, &SimplexVector<T>) -> T + Send + Sync + 'static,
        F: Fn(T, usize, &SimplexVector<T>) -> Vec<T> + Send + Sync + 'static,
        G: Fn(&SimplexVector<T>) -> T + Send + Sync + 'static,
    {
        Self {
            n_states,
            controls,
            horizon,
            reward: Arc::new(reward),
            drift: Arc::new(drift),
            terminal: Arc::new(terminal),
        }
    }

    /// The population-average problem of a single-type continuous scenario:
    /// controls are pure per-state action profiles, `r̄(u, m) = Σ_x m(x) r(x, u_x, m)`,
    /// `f̃` is the scenario's mean-field velocity and `ḡ(m) = Σ_x m(x) g(x, m)`.
    pub fn from_scenario(scenario: &ScenarioModel<T>) -> Result<Self> {
        scenario.mode().expect(KernelMode::ContinuousRate)?;
        if scenario.n_types() != 1 {
            return Err(Error::InvalidParameter(
                "the planner problem is defined for single-type scenarios".into(),
            ));
        }
        let space = &scenario.space;
        let n = scenario.n_states();
        let mut profiles: Vec<Vec<usize>> = vec![Vec::new()];
        for x in 0..n {
            profiles = profiles
                .into_iter()
                .flat_map(|p| {
                    (0..space.n_actions(0, x)).map(move |a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        let controls = profiles
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(x, &a)| space.actions(0, x)[a].clone())
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        let policies: Arc<Vec<Vec<Vec<T>>>> = Arc::new(
            profiles
                .iter()
                .map(|p| {
                    p.iter()
                        .enumerate()
                        .map(|(x, &a)| {
                            let mut d = vec![T::zero(); space.n_actions(0, x)];
                            d[a] = T::one();
                            d
                        })
                        .collect()
                })
                .collect(),
        );
        let profiles = Arc::new(profiles);
        let s_r = scenario.clone();
        let s_f = scenario.clone();
        let s_g = scenario.clone();
        Ok(Self::new(
            n,
            controls,
            scenario.horizon.end(),
            move |t, u, m| {
                let ms = [m.clone()];
                (0..m.len())
                    .map(|x| m.get(x) * s_r.payoff.reward(t, 0, x, profiles[u][x], &ms))
                    .sum()
            },
            move |t, u, m| s_f.mean_field_velocity(t, 0, &policies[u], &[m.clone()]),
            move |m| {
                let ms = [m.clone()];
                (0..m.len()).map(|x| m.get(x) * s_g.payoff.terminal(0, x, &ms)).sum()
            },
        ))
    }

    pub fn reward(&self, t: T, u: usize, m: &SimplexVector<T>) -> T {
        (self.reward)(t, u, m)
    }

    pub fn drift(&self, t: T, u: usize, m: &SimplexVector<T>) -> Vec<T> {
        (self.drift)(t, u, m)
    }

    pub fn terminal(&self, m: &SimplexVector<T>) -> T {
        (self.terminal)(m)
    }
}

/// Grid values and maximizing controls at every time of the DP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution<T> {
    pub times: Vec<T>,
    /// `values[k][i]` at time `times[k]` and grid point `i`.
    pub values: Vec<Vec<T>>,
    /// `policy[k][i]` is the control index chosen on `[t_k, t_{k+1})`.
    pub policy: Vec<Vec<usize>>,
}

impl<T: Scalar> ControlSolution<T> {
    pub fn value_at(&self, grid: &SimplexGrid, k: usize, m: &[T]) -> T {
        grid.interpolate(&self.values[k], m)
    }
}

/// Backward dynamic programming on the simplex grid:
/// `v̄(t, m) = max_u { Δt·r̄_t(u, m) + v̄(t + Δt, m + Δt·f̃_t(u, m)) }`,
/// the continuation read off by barycentric interpolation.
pub fn solve_mf_control_simplex_dp<T: Scalar>(
    problem: &PlannerProblem<T>,
    grid: &SimplexGrid,
    dt: T,
) -> Result<ControlSolution<T>> {
    if problem.n_states > MAX_GRID_STATES {
        return Err(Error::StateTooLarge(problem.n_states));
    }
    if grid.n_states() != problem.n_states {
        return Err(Error::ShapeMismatch(format!(
            "grid over {} states, problem has {}",
            grid.n_states(),
            problem.n_states
        )));
    }
    if problem.controls.is_empty() {
        return Err(Error::InvalidParameter("empty control set".into()));
    }
    let steps = grid_steps(problem.horizon, dt)?;
    let clamp = T::lit(1e-8);
    let points: Vec<SimplexVector<T>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let mut values = vec![points.iter().map(|p| problem.terminal(p)).collect::<Vec<T>>()];
    let mut policy = Vec::with_capacity(steps);
    for k in (0..steps).rev() {
        let t = T::from_usize_lossy(k) * dt;
        let next = values.last().expect("terminal values present");
        let mut v_k = Vec::with_capacity(points.len());
        let mut u_k = Vec::with_capacity(points.len());
        for p in &points {
            let mut q = Vec::with_capacity(problem.controls.len());
            for u in 0..problem.controls.len() {
                let f = problem.drift(t, u, p);
                let mut moved: Vec<T> = p.as_slice().iter().zip(&f).map(|(&m, &d)| m + dt * d).collect();
                let low = moved.iter().copied().fold(T::zero(), T::min);
                let sum: T = moved.iter().copied().sum();
                let excess = (-low).max((sum - T::one()).abs());
                if excess > clamp {
                    return Err(Error::OffSimplexStep {
                        t: t.to_f64_lossy(),
                        excess: excess.to_f64_lossy(),
                    });
                }
                moved.iter_mut().for_each(|m| *m = m.max(T::zero()));
                let total: T = moved.iter().copied().sum();
                moved.iter_mut().for_each(|m| *m /= total);
                q.push(dt * problem.reward(t, u, p) + grid.interpolate(next, &moved));
            }
            let best = argmax_first(&q);
            v_k.push(q[best]);
            u_k.push(best);
        }
        values.push(v_k);
        policy.push(u_k);
    }
    values.reverse();
    policy.reverse();
    Ok(ControlSolution {
        times: (0..=steps).map(|k| T::from_usize_lossy(k) * dt).collect(),
        values,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size_matches_binomial() {
        for n in 1..=4 {
            for k in 1..=12 {
                let g = SimplexGrid::new(n, k).unwrap();
                assert_eq!(g.len(), SimplexGrid::expected_len(n, k));
            }
        }
        assert!(matches!(SimplexGrid::new(5, 3), Err(Error::StateTooLarge(5))));
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = SimplexGrid::new(4, 5).unwrap();
        let coef = [0.3, -1.2, 2.0, 0.7];
        let values: Vec<f64> = (0..g.len())
            .map(|i| g.point::<f64>(i).expectation(&coef))
            .collect();
        let m = [0.13, 0.41, 0.07, 0.39];
        let exact: f64 = m.iter().zip(&coef).map(|(a, b)| a * b).sum();
        assert!((g.interpolate(&values, &m) - exact).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_at_grid_points_and_weights_sum_to_one() {
        let g = SimplexGrid::new(3, 7).unwrap();
        for i in 0..g.len() {
            let p = g.point::<f64>(i);
            let w = g.barycentric(p.as_slice());
            let total: f64 = w.iter().map(|(_, x)| x).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let at: f64 = w.iter().filter(|(j, _)| *j == i).map(|(_, x)| x).sum();
            assert!((at - 1.0).abs() < 1e-9);
        }
    }
}
