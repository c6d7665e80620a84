//! Evolutionary dynamics: revision protocols, the forward (mean-field) vector
//! field they induce, simplex integration and rest-point search.

mod integrate;
mod protocol;
mod restpoints;

pub use integrate::{integrate_forward, integrate_forward_detailed, ForwardRun, IntegratorConfig, Method};
pub use protocol::{
    matrix_game_payoff, protocol_to_kernel, ConstantRates, MutatedKernel, PopulationPayoff,
    ProtocolKernel, ProtocolKind, RateKernel, RevisionProtocol,
};
pub use restpoints::{find_rest_points, RestPointReport};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// Forward-equation drift for a rate kernel, `ℒ[x][x']` being the rate from
/// `x` to `x'`:
///
/// `ṁ(x) = Σ_{x'≠x} m(x')·ℒ_{x'x} − m(x)·Σ_{x'≠x} ℒ_{xx'}`.
///
/// Flows are accumulated pairwise so the components cancel in sum.
pub fn mean_field_drift<T: Scalar>(rates: &[Vec<T>], m: &SimplexVector<T>) -> Result<Vec<T>> {
    let n = m.len();
    if rates.len() != n || rates.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!(
            "rate kernel is not {n}x{n}"
        )));
    }
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
    Ok(drift_unchecked(rates, m.as_slice()))
}

pub(crate) fn drift_unchecked<T: Scalar>(rates: &[Vec<T>], m: &[T]) -> Vec<T> {
    let n = m.len();
    let mut out = vec![T::zero(); n];
    for x in 0..n {
        for y in x + 1..n {
            let net = m[x] * rates[x][y] - m[y] * rates[y][x];
            out[x] -= net;
            out[y] += net;
        }
    }
    out
}
