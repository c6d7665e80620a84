//! Discrete-time mean field equilibrium: backward Bellman–Shapley recursion
//! coupled with the forward Kolmogorov recursion.

mod backward;
mod fixed_point;
mod forward;
mod risk;
mod verify;

pub use backward::{backward_bellman, backward_bellman_with, stage_q_values, Expectation, Selection};
pub use fixed_point::{solve_bsk_fixed_point, FixedPointOptions, MfeSolution, SmoothingSchedule, TieBreak};
pub(crate) use fixed_point::damped_fixed_point;
pub use forward::forward_kolmogorov;
pub use risk::{
    enumerate_returns, enumerate_returns_along, enumerate_risk_value_oracle,
    enumerate_risk_value_oracle_along, return_stats, risk_sensitive_backward,
    risk_sensitive_backward_with, ReturnStats, RiskOptions, ENUMERATION_LIMIT,
};
pub use verify::{verify_support_condition, SupportReport, SupportWitness};
