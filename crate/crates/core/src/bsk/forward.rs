use crate::error::{Error, Result};
use crate::kernel::{policy_averaged_kernel, KernelMode};
use crate::scalar::Scalar;
use crate::scenario::ScenarioModel;
use crate::simplex::SimplexVector;
use crate::trajectory::{MeanFieldTrajectory, PolicyTrajectory};

/// Push `m0` forward through the population kernel induced by `u`.
pub fn forward_kolmogorov<T: Scalar>(
    scenario: &ScenarioModel<T>,
    u: &PolicyTrajectory<T>,
    m0: &[SimplexVector<T>],
) -> Result<MeanFieldTrajectory<T>> {
    scenario.mode().expect(KernelMode::DiscreteProbability)?;
    u.check_shape(&scenario.space)?;
    if m0.len() != scenario.n_types() {
        return Err(Error::ShapeMismatch(format!(
            "{} initial profiles for {} types",
            m0.len(),
            scenario.n_types()
        )));
    }
    let n = scenario.n_states();
    let mut profiles = vec![m0.to_vec()];
    for t in 0..u.len() {
        let m_t = profiles.last().expect("initial profile present");
        let tt = T::from_usize_lossy(t);
        let mut next = Vec::with_capacity(m_t.len());
        for (ty, m_ty) in m_t.iter().enumerate() {
            let l = policy_averaged_kernel(
                &scenario.kernel,
                KernelMode::DiscreteProbability,
                ty,
                &u.stage(t)[ty],
                m_t,
                tt,
            )?;
            let mut out = vec![T::zero(); n];
            for (x, row) in l.iter().enumerate() {
                let mx = m_ty.get(x);
                if mx == T::zero() {
                    continue;
                }
                for (o, &q) in out.iter_mut().zip(row) {
                    *o += mx * q;
                }
            }
            next.push(SimplexVector::with_tolerance(out, m_ty.tolerance())?);
        }
        profiles.push(next);
    }
    let times = (0..profiles.len()).map(T::from_usize_lossy).collect();
    MeanFieldTrajectory::new(times, profiles)
}
