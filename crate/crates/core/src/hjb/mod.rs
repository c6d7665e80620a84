//! Continuous-time finite-state mean field games: backward HJB along a
//! mean-field trajectory, forward Kolmogorov equation, fixed point,
//! exploitability, and dynamic programming on the simplex for the
//! payoff-of-the-mean-field control problem.

mod backward;
mod forward;
mod grid;
mod solve;

pub use backward::{backward_hjb, backward_hjb_with, hamiltonian_residual, policy_value};
pub use forward::forward_kfe;
pub use grid::{solve_mf_control_simplex_dp, ControlSolution, PlannerProblem, SimplexGrid};
pub use solve::{exploitability, solve_mfg_fixed_point, time_grid, Exploitability};
