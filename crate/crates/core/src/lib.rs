//! Energy-efficiency-optimal transmit-power adaptation for a
//! sensing-based spectrum-sharing link under imperfect sensing.
//!
//! A secondary transmitter senses the channel, then transmits with one of
//! two power levels depending on the (possibly wrong) sensing decision. The
//! crate models the sensing statistics, evaluates the achievable-rate lower
//! bound and the energy-efficiency objective over seeded fading draws,
//! derives the closed-form per-realization optimal powers from the KKT
//! conditions under average or peak transmit-power constraints plus an
//! average interference constraint, and maximizes EE with a parametric
//! outer iteration wrapped around subgradient dual updates. Brute-force
//! reference maximizers and a Monte Carlo exact-rate estimator are included
//! for validation.

pub mod channel;
pub mod error;
pub mod oracle;
pub mod power;
pub mod rate;
pub mod sensing;
pub mod solver;

pub use channel::{draw_samples, ChannelSampleSet, FadingConfig};
pub use error::{Error, Result};
pub use oracle::{
    best_adaptive_policy, best_constant_policy, stationarity_residual, GridSpec, Spacing,
};
pub use power::{optimal_power_avg, optimal_power_peak, Constraints, DualState};
pub use rate::{
    exact_rate_mc, exact_rate_mc_fading_avg, power_accounting, rate_lower_bound,
    rate_lower_bound_fixed_gain, EEBreakdown, ExactRateEstimate, PowerPolicy, SystemParams,
};
pub use sensing::{branch_probs, Branch, BranchProbs, SensingSpec};
pub use solver::{
    dinkelbach_f, solve, solve_inner, solve_inner_warm, solve_on_samples, write_trace_csv,
    InnerSolution, SolveResult, SolverConfig, StepRule, TraceRecord,
};
