//! Scalar abstraction shared by every solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Default absolute slack for sum-to-one checks on the simplex.
    const SIMPLEX_TOL: f64;
    /// Negative masses above `-CLAMP_TOL` are treated as round-off and clamped to zero.
    const CLAMP_TOL: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const SIMPLEX_TOL: f64 = 1e-9;
    const CLAMP_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const SIMPLEX_TOL: f64 = 1e-5;
    const CLAMP_TOL: f64 = 1e-6;
}

/// Numerically stable `log(Σ exp(xᵢ))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Softmax of `xs / temperature`, written into a fresh vector.
pub fn softmax<T: Scalar>(xs: &[T], temperature: T) -> Vec<T> {
    let scaled: Vec<T> = xs.iter().map(|&x| x / temperature).collect();
    let lse = log_sum_exp(&scaled);
    scaled.into_iter().map(|x| (x - lse).exp()).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_first<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
