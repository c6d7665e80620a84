use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::SimplexVector;

/// Population rate kernel `m ↦ ℒ(m)`, `ℒ[x][x']` the switching rate from `x` to `x'`.
/// Diagonal entries are ignored.
pub trait RateKernel<T>: Send + Sync {
    fn n_states(&self) -> usize;
    fn rates(&self, m: &SimplexVector<T>) -> Vec<Vec<T>>;
}

/// Per-state payoff `r_x(m)` of a population game.
pub type PopulationPayoff<T> = Arc<dyn Fn(&SimplexVector<T>) -> Vec<T> + Send + Sync>;

/// Payoff `r(m) = A·m` of a symmetric matrix game.
pub fn matrix_game_payoff<T: Scalar>(matrix: Vec<Vec<T>>) -> PopulationPayoff<T> {
    Arc::new(move |m: &SimplexVector<T>| matrix.iter().map(|row| m.expectation(row)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolKind<T> {
    /// Pairwise proportional imitation.
    Replicator,
    Smith,
    /// Brown–von Neumann–Nash (excess payoff).
    Bnn,
    /// Logit choice with temperature `η > 0`.
    SmoothedBestResponse { temperature: T },
}

impl<T: Scalar> ProtocolKind<T> {
    pub const NAMES: [&'static str; 4] = ["replicator", "smith", "bnn", "smoothed-best-response"];

    /// Parses a protocol name; `temperature` is only used by the smoothed best response.
    pub fn from_name(name: &str, temperature: T) -> Result<Self> {
        match name {
            "replicator" => Ok(Self::Replicator),
            "smith" => Ok(Self::Smith),
            "bnn" | "brown-von-neumann-nash" => Ok(Self::Bnn),
            "smoothed-best-response" | "logit" => {
                Ok(Self::SmoothedBestResponse { temperature })
            }
            other => Err(Error::UnknownProtocol(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Replicator => "replicator",
            Self::Smith => "smith",
            Self::Bnn => "bnn",
            Self::SmoothedBestResponse { .. } => "smoothed-best-response",
        }
    }
}

#[derive(Clone)]
pub struct RevisionProtocol<T> {
    pub kind: ProtocolKind<T>,
    pub payoff: PopulationPayoff<T>,
    pub n_states: usize,
}

impl<T: Scalar> fmt::Debug for RevisionProtocol<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RevisionProtocol")
            .field("kind", &self.kind)
            .field("n_states", &self.n_states)
            .finish()
    }
}

impl<T: Scalar> RevisionProtocol<T> {
    pub fn new(kind: ProtocolKind<T>, payoff: PopulationPayoff<T>, n_states: usize) -> Self {
        Self {
            kind,
            payoff,
            n_states,
        }
    }
}

/// Rate kernel induced by a revision protocol.
#[derive(Debug, Clone)]
pub struct ProtocolKernel<T: Scalar> {
    protocol: RevisionProtocol<T>,
}

pub fn protocol_to_kernel<T: Scalar>(protocol: RevisionProtocol<T>) -> Result<ProtocolKernel<T>> {
    if let ProtocolKind::SmoothedBestResponse { temperature } = protocol.kind {
        if !(temperature > T::zero()) || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothed best response needs temperature > 0, got {temperature}"
            )));
        }
    }
    if protocol.n_states == 0 {
        return Err(Error::ShapeMismatch("protocol over an empty state space".into()));
    }
    Ok(ProtocolKernel { protocol })
}

impl<T: Scalar> ProtocolKernel<T> {
    pub fn protocol(&self) -> &RevisionProtocol<T> {
        &self.protocol
    }

    pub fn payoff(&self, m: &SimplexVector<T>) -> Vec<T> {
        (self.protocol.payoff)(m)
    }
}

#[inline]
fn pos<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

impl<T: Scalar> RateKernel<T> for ProtocolKernel<T> {
    fn n_states(&self) -> usize {
        self.protocol.n_states
    }

    fn rates(&self, m: &SimplexVector<T>) -> Vec<Vec<T>> {
        let r = (self.protocol.payoff)(m);
        let n = r.len();
        match self.protocol.kind {
            ProtocolKind::Replicator => (0..n)
                .map(|x| (0..n).map(|y| m[y] * pos(r[y] - r[x])).collect())
                .collect(),
            ProtocolKind::Smith => (0..n)
                .map(|x| (0..n).map(|y| pos(r[y] - r[x])).collect())
                .collect(),
            ProtocolKind::Bnn => {
                let avg = m.expectation(&r);
                let row: Vec<T> = r.iter().map(|&ry| pos(ry - avg)).collect();
                vec![row; n]
            }
            ProtocolKind::SmoothedBestResponse { temperature } => {
                let row = crate::scalar::softmax(&r, temperature);
                vec![row; n]
            }
        }
    }
}

impl<T, K: RateKernel<T> + ?Sized> RateKernel<T> for Box<K> {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }

    fn rates(&self, m: &SimplexVector<T>) -> Vec<Vec<T>> {
        (**self).rates(m)
    }
}

/// Time-independent rate matrix.
#[derive(Debug, Clone)]
pub struct ConstantRates<T>(pub Vec<Vec<T>>);

impl<T: Scalar> RateKernel<T> for ConstantRates<T> {
    fn n_states(&self) -> usize {
        self.0.len()
    }

    fn rates(&self, _m: &SimplexVector<T>) -> Vec<Vec<T>> {
        self.0.clone()
    }
}

/// Adds uniform mutation at total rate `epsilon` (split evenly over the other
/// states) to an inner kernel.
pub struct MutatedKernel<T, K> {
    pub inner: K,
    pub epsilon: T,
}

impl<T: Scalar, K: RateKernel<T>> RateKernel<T> for MutatedKernel<T, K> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn rates(&self, m: &SimplexVector<T>) -> Vec<Vec<T>> {
        let n = self.n_states();
        let mut rates = self.inner.rates(m);
        if n > 1 {
            let each = self.epsilon / T::from_usize_lossy(n - 1);
            for (x, row) in rates.iter_mut().enumerate() {
                for (y, r) in row.iter_mut().enumerate() {
                    if x != y {
                        *r += each;
                    }
                }
            }
        }
        rates
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::mean_field_drift;
    use rand::SeedableRng;

    fn rps() -> PopulationPayoff<f64> {
        matrix_game_payoff(vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
    }

    #[test]
    fn unknown_protocol() {
        assert!(matches!(
            ProtocolKind::<f64>::from_name("fictitious", 1.0),
            Err(Error::UnknownProtocol(_))
        ));
    }

    #[test]
    fn replicator_with_constant_payoff_has_no_rates() {
        let k = protocol_to_kernel(RevisionProtocol::new(
            ProtocolKind::Replicator,
            Arc::new(|_: &SimplexVector<f64>| vec![2.0; 3]),
            3,
        ))
        .unwrap();
        let m = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let rates = k.rates(&m);
        assert!(rates.iter().flatten().all(|&r| r == 0.0));
        assert!(mean_field_drift(&rates, &m).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn replicator_drift_matches_closed_form() {
        // ṁ(x) = m(x)·(r_x − Σ m r) at random interior points and random payoff matrices
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::Rng;
        for _ in 0..100 {
            let a: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let m = SimplexVector::random(3, &mut rng);
            let k = protocol_to_kernel(RevisionProtocol::new(
                ProtocolKind::Replicator,
                matrix_game_payoff(a.clone()),
                3,
            ))
            .unwrap();
            let d = mean_field_drift(&k.rates(&m), &m).unwrap();
            let r: Vec<f64> = a.iter().map(|row| m.expectation(row)).collect();
            let avg = m.expectation(&r);
            for x in 0..3 {
                assert!((d[x] - m[x] * (r[x] - avg)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn logit_rows_flatten_at_high_temperature() {
        let k = protocol_to_kernel(RevisionProtocol::new(
            ProtocolKind::SmoothedBestResponse { temperature: 1e8 },
            rps(),
            3,
        ))
        .unwrap();
        let m = SimplexVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        for row in k.rates(&m) {
            for r in row {
                assert!((r - 1.0 / 3.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn logit_needs_positive_temperature() {
        let err = protocol_to_kernel(RevisionProtocol::new(
            ProtocolKind::SmoothedBestResponse { temperature: 0.0 },
            rps(),
            3,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn smith_and_bnn_rates_are_nonnegative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for kind in [ProtocolKind::Smith, ProtocolKind::Bnn] {
            let k = protocol_to_kernel(RevisionProtocol::new(kind, rps(), 3)).unwrap();
            for _ in 0..20 {
                let m = SimplexVector::random(3, &mut rng);
                assert!(k.rates(&m).iter().flatten().all(|&r| r >= 0.0));
            }
        }
    }
}
