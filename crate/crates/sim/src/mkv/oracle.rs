use serde::Serialize;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance at time `t` of the limit law of
/// `dx = (a(m̄_t − x) + b)dt + s dB` started from a law with the given moments.
/// The population mean moves at speed `b` since the interaction averages out.
pub fn ou_oracle(a: f64, b: f64, s: f64, mean0: f64, var0: f64, t: f64) -> Result<OuMoments> {
    if !(a > 0.0) || ![a, b, s, mean0, var0, t].iter().all(|v| v.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "OU oracle needs a > 0 and finite inputs (a={a}, b={b}, s={s})"
        )));
    }
    let decay = (-2.0 * a * t).exp();
    Ok(OuMoments {
        mean: mean0 + b * t,
        variance: var0 * decay + s * s / (2.0 * a) * (1.0 - decay),
    })
}
