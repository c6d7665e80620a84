//! Finite-n interacting Markov chains driven by a scenario's kernel and the
//! empirical measure of the players.

mod chaos;
mod csma;
mod double_limit;
mod simulate;
mod study;

pub use chaos::{chaos_gap, chaos_study, pair_chaos_gap, ChaosGap, ChaosRow, ChaosStudy, PairMoments};
pub use csma::{
    csma_fixed_point, csma_scenario, simulate_csma, stationary_backoff, CsmaRun, CsmaStudy,
};
pub use double_limit::{double_limit_experiment, DoubleLimitReport};
pub(crate) use simulate::check_permutation;
pub use simulate::{
    largest_remainder, simulate_nplayer, EmpiricalTrajectory, InitMode, PolicyInput, SimConfig,
    SimulationRun,
};
pub use study::{
    convergence_study, l1_trajectory_distance, mean_field_reference, ConvergenceRow,
    ConvergenceStudy, MIN_REPLICATIONS,
};
