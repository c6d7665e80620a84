//! One-dimensional McKean–Vlasov particle systems: the weighted Euler scheme,
//! empirical CDFs, Wasserstein-1 distances and convergence-order studies.

mod cdf;
mod format;
mod model;
mod oracle;
mod particles;
mod study;

pub use cdf::{w1_distance, AnalyticCdf, Cdf, EmpiricalCdf, GaussianCdf};
pub use format::{
    load_mkv_scenario, parse_mkv_scenario, MkvScenario, RawMkvScenario, RawMkvSimulation, RawParameters,
};
pub use model::{Coefficient, Control, InitialLaw, Interaction, MkvModel, OuParams, Weights};
pub use oracle::{ou_oracle, OuMoments};
pub use particles::{exact_weighted_mean, simulate_particles, ParticleConfig, ParticleRun, BLOWUP};
pub use study::{
    deterministic_order, rate_study, variance_check, OrderStudy, RateRow, RateStudy,
    RateStudyConfig, VarianceCheck,
};
