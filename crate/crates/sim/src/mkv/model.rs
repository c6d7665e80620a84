use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// `(t, x, u) ↦ value`.
pub type Coefficient = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Feedback control `(t, x) ↦ u`.
pub type Control = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Interaction affine in the other particle's position:
/// `g(t, x, u, w) = level(t, x, u) + slope(t, x, u)·w`.
#[derive(Clone)]
pub struct Interaction {
    pub level: Coefficient,
    pub slope: Coefficient,
}

impl Interaction {
    pub fn constant(c: f64) -> Self {
        Self {
            level: Arc::new(move |_, _, _| c),
            slope: Arc::new(|_, _, _| 0.0),
        }
    }

    /// Weighted average `Σ_i ω_i g(t, x, u, x_i)` given `w̄ = Σ_i ω_i x_i`.
    pub fn averaged(&self, t: f64, x: f64, u: f64, w_bar: f64) -> f64 {
        (self.level)(t, x, u) + (self.slope)(t, x, u) * w_bar
    }
}

/// `ω̄_{ij}`: weight of particle `i` in the average seen by particle `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Uniform,
    /// `matrix[i][j]`; every column sums to one.
    Dense(Vec<Vec<f64>>),
}

impl Weights {
    pub fn validate(&self, n: usize) -> Result<()> {
        let Weights::Dense(w) = self else { return Ok(()) };
        if w.len() != n || w.iter().any(|row| row.len() != n) {
            return Err(SimError::InvalidConfig(format!("weight matrix must be {n}x{n}")));
        }
        for j in 0..n {
            let mut sum = 0.0;
            for (i, row) in w.iter().enumerate() {
                if !(row[j] >= 0.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "weight ({i}, {j}) = {} is negative",
                        row[j]
                    )));
                }
                sum += row[j];
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(SimError::InvalidConfig(format!(
                    "weights seen by particle {j} sum to {sum}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialLaw {
    Gaussian { mean: f64, variance: f64 },
    Point { at: f64 },
    /// Explicit positions, one per particle.
    Positions { values: Vec<f64> },
}

/// Parameters of `f(x, u, w) = a(w − x) + b + u`, `σ ≡ s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

#[derive(Clone)]
pub struct MkvModel {
    pub name: String,
    pub drift: Interaction,
    pub volatility: Interaction,
    pub control: Control,
    pub weights: Weights,
    pub initial: InitialLaw,
    /// Set for the Ornstein–Uhlenbeck family, whose limit law is known.
    pub ou: Option<OuParams>,
}

impl fmt::Debug for MkvModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MkvModel")
            .field("name", &self.name)
            .field("weights", &self.weights)
            .field("initial", &self.initial)
            .field("ou", &self.ou)
            .finish_non_exhaustive()
    }
}

fn zero_control() -> Control {
    Arc::new(|_, _| 0.0)
}

impl MkvModel {
    /// Mean-reverting interaction `f = a(w − x) + b + u`, `σ ≡ s`, no control.
    pub fn ou(params: OuParams, initial: InitialLaw) -> Result<Self> {
        let OuParams { a, b, s } = params;
        if !(a > 0.0 && a.is_finite() && b.is_finite() && s.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "OU parameters need a > 0 and finite b, s (a={a}, b={b}, s={s})"
            )));
        }
        Ok(Self {
            name: "ou".into(),
            drift: Interaction {
                level: Arc::new(move |_, x, u| -a * x + b + u),
                slope: Arc::new(move |_, _, _| a),
            },
            volatility: Interaction::constant(s),
            control: zero_control(),
            weights: Weights::Uniform,
            initial,
            ou: Some(params),
        })
    }

    /// `f ≡ c`, `σ ≡ 0`.
    pub fn pure_drift(c: f64, initial: InitialLaw) -> Self {
        Self {
            name: "pure-drift".into(),
            drift: Interaction::constant(c),
            volatility: Interaction::constant(0.0),
            control: zero_control(),
            weights: Weights::Uniform,
            initial,
            ou: None,
        }
    }

    /// Coefficients read off piecewise-linear tables over the knots `x`
    /// (constant beyond the ends): `f = level(x) + slope(x)·w + u`, `σ = sigma(x)`.
    pub fn custom_table(
        knots: Vec<f64>,
        level: Vec<f64>,
        slope: Vec<f64>,
        sigma: Vec<f64>,
        initial: InitialLaw,
    ) -> Result<Self> {
        let n = knots.len();
        if n == 0 || level.len() != n || slope.len() != n || sigma.len() != n {
            return Err(SimError::InvalidConfig(
                "custom tables need equally long, non-empty knot and value arrays".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SimError::InvalidConfig("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(&level).chain(&slope).chain(&sigma).any(|v| !v.is_finite()) {
            return Err(SimError::InvalidConfig("table entries must be finite".into()));
        }
        let knots = Arc::new(knots);
        let table = |values: Vec<f64>| {
            let knots = Arc::clone(&knots);
            move |x: f64| interpolate(&knots, &values, x)
        };
        let (lv, sl, sg) = (table(level), table(slope), table(sigma));
        Ok(Self {
            name: "custom-table".into(),
            drift: Interaction {
                level: Arc::new(move |_, x, u| lv(x) + u),
                slope: Arc::new(move |_, x, _| sl(x)),
            },
            volatility: Interaction {
                level: Arc::new(move |_, x, _| sg(x)),
                slope: Arc::new(|_, _, _| 0.0),
            },
            control: zero_control(),
            weights: Weights::Uniform,
            initial,
            ou: None,
        })
    }

    pub fn with_control(mut self, control: Control) -> Self {
        self.control = control;
        self.ou = None;
        self
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }
}

fn interpolate(knots: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= knots[0] {
        return values[0];
    }
    let last = knots.len() - 1;
    if x >= knots[last] {
        return values[last];
    }
    let i = knots.partition_point(|&k| k <= x) - 1;
    let s = (x - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] + s * (values[i + 1] - values[i])
}
