use super::backward::check_grid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenario::ScenarioModel;
use crate::simplex::SimplexVector;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory};

fn velocity<T: Scalar>(
    scenario: &ScenarioModel<T>,
    t: T,
    stage: &[Vec<Vec<T>>],
    m: &[Vec<T>],
) -> Vec<Vec<T>> {
    let probe: Vec<SimplexVector<T>> = m.iter().map(|p| SimplexVector::unchecked(p.clone())).collect();
    (0..scenario.n_types())
        .map(|ty| scenario.mean_field_velocity(t, ty, &stage[ty], &probe))
        .collect()
}

fn shifted<T: Scalar>(m: &[Vec<T>], h: T, d: &[Vec<T>]) -> Vec<Vec<T>> {
    m.iter()
        .zip(d)
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + h * y).collect())
        .collect()
}

/// Forward Kolmogorov equation under `u` (held fixed on each grid interval),
/// rk4 on the uniform grid of step `dt`. Uses the scenario's explicit drift
/// when it has one.
pub fn forward_kfe<T: Scalar>(
    scenario: &ScenarioModel<T>,
    u: &PolicyTrajectory<T>,
    m0: &[SimplexVector<T>],
    dt: T,
) -> Result<MeanFieldTrajectory<T>> {
    let steps = super::solve::steps_for(scenario, dt)?;
    u.check_shape(&scenario.space)?;
    if u.len() != steps {
        return Err(Error::GridMismatch(format!(
            "policy has {} stages, grid has {steps} intervals",
            u.len()
        )));
    }
    if m0.len() != scenario.n_types() {
        return Err(Error::ShapeMismatch(format!(
            "{} initial profiles for {} types",
            m0.len(),
            scenario.n_types()
        )));
    }
    let two = T::lit(2.0);
    let half = dt / two;
    let mut state: Vec<Vec<T>> = m0.iter().map(|p| p.as_slice().to_vec()).collect();
    let mut profiles = vec![m0.to_vec()];
    for k in 0..steps {
        let t = T::from_usize_lossy(k) * dt;
        let stage = u.stage(k);
        let k1 = velocity(scenario, t, stage, &state);
        let k2 = velocity(scenario, t + half, stage, &shifted(&state, half, &k1));
        let k3 = velocity(scenario, t + half, stage, &shifted(&state, half, &k2));
        let k4 = velocity(scenario, t + dt, stage, &shifted(&state, dt, &k3));
        for (ty, s) in state.iter_mut().enumerate() {
            for (x, v) in s.iter_mut().enumerate() {
                *v += dt / T::lit(6.0) * (k1[ty][x] + two * k2[ty][x] + two * k3[ty][x] + k4[ty][x]);
            }
        }
        let next = state
            .iter()
            .map(|s| SimplexVector::new(s.clone()))
            .collect::<Result<Vec<_>>>()?;
        profiles.push(next);
    }
    let times = (0..=steps).map(|k| T::from_usize_lossy(k) * dt).collect();
    let traj = MeanFieldTrajectory::new(times, profiles)?;
    debug_assert!(check_grid(scenario, &traj, dt).is_ok());
    Ok(traj)
}
