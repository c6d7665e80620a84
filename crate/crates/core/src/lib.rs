//! Finite-state mean field games.
//!
//! The solvers are generic over the floating point type through [`Scalar`];
//! the aliases at the crate root fix it to `f64`, which is what the CLI and
//! the simulators use.

pub mod bsk;
pub mod dynamics;
pub mod equilibrium;
pub mod families;
pub mod format;
pub mod hjb;
pub mod error;
pub mod kernel;
mod linalg;
pub mod payoff;
pub mod scalar;
pub mod scenario;
pub mod simplex;
pub mod space;
pub mod trajectory;

pub use equilibrium::{check_population_equilibrium, EquilibriumReport};
pub use error::{Error, Result};
pub use kernel::{policy_averaged_kernel, KernelMode, TransitionKernelSpec};
pub use payoff::{reduce_pairwise_payoff, PairwisePayoff, PayoffSpec};
pub use scalar::Scalar;
pub use scenario::{Horizon, ScenarioModel};
pub use simplex::SimplexVector;
pub use space::StateSpace;
pub use trajectory::{MeanFieldTrajectory, PolicyTrajectory, ValueTable};

pub type Simplex = SimplexVector<f64>;
pub type Scenario = ScenarioModel<f64>;
pub type Policy = PolicyTrajectory<f64>;
pub type Trajectory = MeanFieldTrajectory<f64>;
pub type Values = ValueTable<f64>;

pub type Simplex32 = SimplexVector<f32>;
pub type Scenario32 = ScenarioModel<f32>;
