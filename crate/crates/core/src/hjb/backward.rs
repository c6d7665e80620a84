use crate::bsk::Selection;
use crate::error::{Error, Result};
use crate::kernel::KernelMode;
use crate::scalar::{argmax_first, Scalar};
use crate::scenario::ScenarioModel;
use crate::simplex::SimplexVector;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory, ValueTable};

pub(crate) fn check_grid<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
    dt: T,
) -> Result<usize> {
    scenario.mode().expect(KernelMode::ContinuousRate)?;
    let steps = super::solve::steps_for(scenario, dt)?;
    if m_traj.len() != steps + 1 {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} points, step {dt} needs {}",
            m_traj.len(),
            steps + 1
        )));
    }
    let tol = T::lit(1e-9) * scenario.horizon.end().max(T::one());
    for (k, &t) in m_traj.times().iter().enumerate() {
        if (t - T::from_usize_lossy(k) * dt).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "grid point {k} at t={t}, expected {}",
                T::from_usize_lossy(k) * dt
            )));
        }
    }
    Ok(steps)
}

/// Action values `r(x,a,m) + Σ_{x'≠x} q̄_{xax'}(m)(v(x') − v(x))`.
fn q_values<T: Scalar>(
    scenario: &ScenarioModel<T>,
    t: T,
    ty: usize,
    x: usize,
    m: &[SimplexVector<T>],
    v: &[T],
    row: &mut [T],
) -> Vec<T> {
    (0..scenario.space.n_actions(ty, x))
        .map(|a| {
            scenario.kernel.row_into(t, ty, x, a, m, row);
            if cfg!(debug_assertions) {
                scenario
                    .kernel
                    .check_row(row, t, ty, x, a)
                    .expect("generator invariant at solver evaluation");
            }
            let jump: T = row
                .iter()
                .zip(v)
                .enumerate()
                .filter(|&(y, _)| y != x)
                .map(|(_, (&q, &w))| q * (w - v[x]))
                .sum();
            scenario.payoff.reward(t, ty, x, a, m) + jump
        })
        .collect()
}

fn hamiltonian<T: Scalar>(
    scenario: &ScenarioModel<T>,
    t: T,
    m: &[SimplexVector<T>],
    v: &[Vec<T>],
    selection: Selection<T>,
) -> Vec<Vec<T>> {
    let mut row = vec![T::zero(); scenario.n_states()];
    v.iter()
        .enumerate()
        .map(|(ty, v_ty)| {
            (0..scenario.n_states())
                .map(|x| {
                    let q = q_values(scenario, t, ty, x, m, v_ty, &mut row);
                    match selection {
                        Selection::Argmax => q[argmax_first(&q)],
                        Selection::Softmax(_) => {
                            selection.distribution(&q).iter().zip(&q).map(|(&p, &w)| p * w).sum()
                        }
                    }
                })
                .collect()
        })
        .collect()
}

fn policy_rate<T: Scalar>(
    scenario: &ScenarioModel<T>,
    t: T,
    m: &[SimplexVector<T>],
    v: &[Vec<T>],
    policy: &[Vec<Vec<T>>],
) -> Vec<Vec<T>> {
    let mut row = vec![T::zero(); scenario.n_states()];
    v.iter()
        .enumerate()
        .map(|(ty, v_ty)| {
            (0..scenario.n_states())
                .map(|x| {
                    let q = q_values(scenario, t, ty, x, m, v_ty, &mut row);
                    policy[ty][x].iter().zip(&q).map(|(&p, &w)| p * w).sum()
                })
                .collect()
        })
        .collect()
}

fn shifted<T: Scalar>(v: &[Vec<T>], h: T, d: &[Vec<T>]) -> Vec<Vec<T>> {
    v.iter()
        .zip(d)
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + h * y).collect())
        .collect()
}

/// One backward rk4 step of `dv/dt = −rhs(t, m_t, v)` from `t_{k+1}` to `t_k`.
fn rk4_back<T, F>(
    v_next: &[Vec<T>],
    t_k: T,
    dt: T,
    m_k: &[SimplexVector<T>],
    m_mid: &[SimplexVector<T>],
    m_next: &[SimplexVector<T>],
    rhs: F,
) -> Vec<Vec<T>>
where
    T: Scalar,
    F: Fn(T, &[SimplexVector<T>], &[Vec<T>]) -> Vec<Vec<T>>,
{
    let half = dt / T::lit(2.0);
    let six = T::lit(6.0);
    let t_mid = t_k + half;
    let k1 = rhs(t_k + dt, m_next, v_next);
    let k2 = rhs(t_mid, m_mid, &shifted(v_next, half, &k1));
    let k3 = rhs(t_mid, m_mid, &shifted(v_next, half, &k2));
    let k4 = rhs(t_k, m_k, &shifted(v_next, dt, &k3));
    v_next
        .iter()
        .enumerate()
        .map(|(ty, row)| {
            row.iter()
                .enumerate()
                .map(|(x, &w)| {
                    w + dt / six
                        * (k1[ty][x] + T::lit(2.0) * k2[ty][x] + T::lit(2.0) * k3[ty][x] + k4[ty][x])
                })
                .collect()
        })
        .collect()
}

fn terminal_values<T: Scalar>(scenario: &ScenarioModel<T>, m_t: &[SimplexVector<T>]) -> Vec<Vec<T>> {
    (0..scenario.n_types())
        .map(|ty| {
            (0..scenario.n_states())
                .map(|x| scenario.payoff.terminal(ty, x, m_t))
                .collect()
        })
        .collect()
}

fn midpoint<T: Scalar>(a: &[SimplexVector<T>], b: &[SimplexVector<T>]) -> Vec<SimplexVector<T>> {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            SimplexVector::unchecked(
                p.as_slice()
                    .iter()
                    .zip(q.as_slice())
                    .map(|(&x, &y)| (x + y) / T::lit(2.0))
                    .collect(),
            )
        })
        .collect()
}

fn check_finite<T: Scalar>(v: &[Vec<T>], stage: usize) -> Result<()> {
    for (ty, row) in v.iter().enumerate() {
        if let Some(state) = row.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFiniteValue { stage, ty, state });
        }
    }
    Ok(())
}

/// Pure maximizer of `q` unless the maximizer at the interval end differs; then
/// the two are mixed by the share of the interval before the interpolated switch.
fn switching_mix<T: Scalar>(q: &[T], q_next: &[T]) -> Vec<T> {
    let a0 = argmax_first(q);
    let a1 = argmax_first(q_next);
    let mut dist = vec![T::zero(); q.len()];
    let d0 = q[a0] - q[a1];
    let d1 = q_next[a0] - q_next[a1];
    if a0 == a1 || d0 - d1 <= T::zero() {
        dist[a0] = T::one();
        return dist;
    }
    let share = (d0 / (d0 - d1)).max(T::zero()).min(T::one());
    dist[a0] = share;
    dist[a1] = T::one() - share;
    dist
}

/// Backward HJB along `m_traj` on the uniform grid of step `dt`; the policy
/// on `[t_k, t_{k+1})` is the maximizer at `t_k`, mixed with the maximizer at
/// `t_{k+1}` on intervals that contain a switch.
pub fn backward_hjb<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
    dt: T,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    backward_hjb_with(scenario, m_traj, dt, Selection::Argmax)
}

pub fn backward_hjb_with<T: Scalar>(
    scenario: &ScenarioModel<T>,
    m_traj: &MeanFieldTrajectory<T>,
    dt: T,
    selection: Selection<T>,
) -> Result<(ValueTable<T>, PolicyTrajectory<T>)> {
    let steps = check_grid(scenario, m_traj, dt)?;
    let mut values = vec![terminal_values(scenario, m_traj.at(steps))];
    let mut policy = Vec::with_capacity(steps);
    let mut row = vec![T::zero(); scenario.n_states()];
    for k in (0..steps).rev() {
        let t_k = m_traj.times()[k];
        let m_k = m_traj.at(k);
        let mid = midpoint(m_k, m_traj.at(k + 1));
        let v_next = values.last().expect("terminal values present");
        let v_k = rk4_back(v_next, t_k, dt, m_k, &mid, m_traj.at(k + 1), |t, m, v| {
            hamiltonian(scenario, t, m, v, selection)
        });
        check_finite(&v_k, k)?;
        let t_next = m_traj.times()[k + 1];
        let stage = v_k
            .iter()
            .enumerate()
            .map(|(ty, v_ty)| {
                (0..scenario.n_states())
                    .map(|x| {
                        let q = q_values(scenario, t_k, ty, x, m_k, v_ty, &mut row);
                        match selection {
                            Selection::Argmax => {
                                let q_next = q_values(
                                    scenario,
                                    t_next,
                                    ty,
                                    x,
                                    m_traj.at(k + 1),
                                    &v_next[ty],
                                    &mut row,
                                );
                                switching_mix(&q, &q_next)
                            }
                            Selection::Softmax(_) => selection.distribution(&q),
                        }
                    })
                    .collect()
            })
            .collect();
        policy.push(stage);
        values.push(v_k);
    }
    values.reverse();
    policy.reverse();
    Ok((ValueTable::new(values), PolicyTrajectory::new(policy)?))
}

/// Value of following `u` (held fixed on each grid interval) along `m_traj`.
pub fn policy_value<T: Scalar>(
    scenario: &ScenarioModel<T>,
    u: &PolicyTrajectory<T>,
    m_traj: &MeanFieldTrajectory<T>,
    dt: T,
) -> Result<ValueTable<T>> {
    let steps = check_grid(scenario, m_traj, dt)?;
    u.check_shape(&scenario.space)?;
    if u.len() != steps {
        return Err(Error::GridMismatch(format!(
            "policy has {} stages, grid has {steps} intervals",
            u.len()
        )));
    }
    let mut values = vec![terminal_values(scenario, m_traj.at(steps))];
    for k in (0..steps).rev() {
        let m_k = m_traj.at(k);
        let mid = midpoint(m_k, m_traj.at(k + 1));
        let v_next = values.last().expect("terminal values present");
        let stage = u.stage(k);
        let v_k = rk4_back(v_next, m_traj.times()[k], dt, m_k, &mid, m_traj.at(k + 1), |t, m, v| {
            policy_rate(scenario, t, m, v, stage)
        });
        check_finite(&v_k, k)?;
        values.push(v_k);
    }
    values.reverse();
    Ok(ValueTable::new(values))
}

/// Largest `|Δv/Δt + H(t_k, v_k)|` over interior grid times: the discrete
/// residual of the backward equation.
pub fn hamiltonian_residual<T: Scalar>(
    scenario: &ScenarioModel<T>,
    values: &ValueTable<T>,
    m_traj: &MeanFieldTrajectory<T>,
    dt: T,
) -> Result<T> {
    let steps = check_grid(scenario, m_traj, dt)?;
    let mut worst = T::zero();
    for k in 1..steps {
        let h = hamiltonian(scenario, m_traj.times()[k], m_traj.at(k), values.at(k), Selection::Argmax);
        for (ty, h_ty) in h.iter().enumerate() {
            for (x, &hx) in h_ty.iter().enumerate() {
                let dv = (values.get(k + 1, ty, x) - values.get(k - 1, ty, x)) / (T::lit(2.0) * dt);
                worst = worst.max((dv + hx).abs());
            }
        }
    }
    Ok(worst)
}
