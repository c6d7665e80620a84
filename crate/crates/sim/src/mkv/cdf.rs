use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Result, SimError};

/// A cumulative distribution function on the real line.
pub trait AnalyticCdf {
    fn cdf(&self, w: f64) -> f64;

    /// Interval outside of which `F` and `1 − F` are negligible, or `None`
    /// when the tails are not known to be integrable.
    fn effective_support(&self) -> Option<(f64, f64)>;
}

/// Normal law; tails are cut at twelve standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianCdf {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianCdf {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "Gaussian law needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(Self {
            mean,
            sd: variance.sqrt(),
        })
    }
}

impl AnalyticCdf for GaussianCdf {
    fn cdf(&self, w: f64) -> f64 {
        0.5 * (1.0 + erf((w - self.mean) / (self.sd * std::f64::consts::SQRT_2)))
    }

    fn effective_support(&self) -> Option<(f64, f64)> {
        Some((self.mean - 12.0 * self.sd, self.mean + 12.0 * self.sd))
    }
}

/// Right-continuous weighted step CDF `F(w) = Σ_j ω_j 1{x_j ≤ w}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    /// Equal weights `1/n`.
    pub fn uniform(positions: &[f64]) -> Result<Self> {
        let w = 1.0 / positions.len() as f64;
        Self::weighted(positions, &vec![w; positions.len()])
    }

    pub fn weighted(positions: &[f64], weights: &[f64]) -> Result<Self> {
        if positions.is_empty() || positions.len() != weights.len() {
            return Err(SimError::InvalidConfig(
                "an empirical CDF needs as many weights as positions, at least one".into(),
            ));
        }
        if positions.iter().any(|x| !x.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(SimError::InvalidConfig("positions must be finite and weights nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!("weights sum to {total}")));
        }
        let mut pairs: Vec<(f64, f64)> = positions.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut mass: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            if points.last() == Some(&x) {
                *mass.last_mut().expect("paired with point") += w;
            } else {
                points.push(x);
                mass.push(w);
            }
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = mass
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        *cumulative.last_mut().expect("non-empty") = 1.0;
        Ok(Self { points, cumulative })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn eval(&self, w: f64) -> f64 {
        let i = self.points.partition_point(|&x| x <= w);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// `∫ |F − G| dw`, exact for two step functions.
    pub fn w1(&self, other: &EmpiricalCdf) -> f64 {
        let (mut i, mut j) = (0, 0);
        let (mut f, mut g) = (0.0_f64, 0.0_f64);
        let mut prev: Option<f64> = None;
        let mut total = 0.0;
        while i < self.points.len() || j < other.points.len() {
            let a = self.points.get(i).copied().unwrap_or(f64::INFINITY);
            let b = other.points.get(j).copied().unwrap_or(f64::INFINITY);
            let x = a.min(b);
            if let Some(p) = prev {
                total += (f - g).abs() * (x - p);
            }
            if a == x {
                f = self.cumulative[i];
                i += 1;
            }
            if b == x {
                g = other.cumulative[j];
                j += 1;
            }
            prev = Some(x);
        }
        total
    }

    /// `∫ |F − G| dw` against a continuous CDF by adaptive Simpson quadrature
    /// on each constant piece of `F`, split where `G` crosses the step level.
    pub fn w1_analytic(&self, g: &dyn AnalyticCdf, tol: f64) -> Result<f64> {
        let (lo, hi) = g
            .effective_support()
            .ok_or_else(|| SimError::NonIntegrable("analytic CDF has no integrable tails".into()))?;
        let lo = lo.min(self.points[0]);
        let hi = hi.max(*self.points.last().expect("non-empty"));
        let width = hi - lo;
        let mut pieces = Vec::with_capacity(self.points.len() + 1);
        pieces.push((lo, self.points[0], 0.0));
        for k in 0..self.points.len() {
            let right = self.points.get(k + 1).copied().unwrap_or(hi);
            pieces.push((self.points[k], right, self.cumulative[k]));
        }
        let mut total = 0.0;
        for (a, b, level) in pieces {
            if b <= a {
                continue;
            }
            let piece_tol = (tol * (b - a) / width).max(f64::MIN_POSITIVE);
            let h = |w: f64| (level - g.cdf(w)).abs();
            let (ga, gb) = (g.cdf(a), g.cdf(b));
            let value = if ga < level && level < gb {
                let c = crossing(g, level, a, b);
                simpson(&h, a, c, piece_tol / 2.0) + simpson(&h, c, b, piece_tol / 2.0)
            } else {
                simpson(&h, a, b, piece_tol)
            };
            if !value.is_finite() {
                return Err(SimError::NonIntegrable(format!("non-finite integrand on [{a}, {b}]")));
            }
            total += value;
        }
        Ok(total)
    }
}

/// Point where a continuous increasing CDF reaches `level` inside `[a, b]`.
fn crossing(g: &dyn AnalyticCdf, level: f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g.cdf(mid) < level {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Either kind of CDF, for [`w1_distance`].
pub enum Cdf<'a> {
    Empirical(&'a EmpiricalCdf),
    Analytic(&'a dyn AnalyticCdf),
}

/// Wasserstein-1 distance `∫ |F − G| dw`; two analytic laws are not supported.
pub fn w1_distance(f: Cdf<'_>, g: Cdf<'_>, tol: f64) -> Result<f64> {
    match (f, g) {
        (Cdf::Empirical(a), Cdf::Empirical(b)) => Ok(a.w1(b)),
        (Cdf::Empirical(a), Cdf::Analytic(b)) | (Cdf::Analytic(b), Cdf::Empirical(a)) => a.w1_analytic(b, tol),
        (Cdf::Analytic(_), Cdf::Analytic(_)) => Err(SimError::NonIntegrable(
            "distance between two analytic laws is not implemented".into(),
        )),
    }
}
