//! Optimal phase-wise dividend barriers for a surplus process whose
//! interclaim times are driven by an observable phase-type environment chain
//! and whose claims are exponential.
//!
//! The library computes, for each environment phase `i`, the barrier `b_i`
//! above which all surplus is paid out as dividends, together with the
//! expected discounted dividend value functions, by a monotone fixed-point
//! iteration on a uniform grid. Converged solutions can be certified against
//! the analytic optimality conditions ([`verifier`]) and cross-validated
//! against an independent Monte Carlo simulation of the controlled surplus
//! ([`simulator`]).
//!
//! Module map:
//!
//! * [`phase_type`] — the terminating environment chain: validation, expected
//!   time to the next claim, jump sampling.
//! * [`valuefn`] — grid-backed piecewise-linear value functions with exact
//!   exponential-kernel quadrature.
//! * [`solver`] — the barrier/value fixed-point iteration.
//! * [`verifier`] — post-hoc optimality checks with a structured report.
//! * [`simulator`] — reproducible Monte Carlo estimation of discounted
//!   dividends under arbitrary barriers.
//! * [`golden`] — embedded benchmark cases with reference barriers.

pub mod golden;
pub mod phase_type;
pub mod simulator;
pub mod solver;
pub mod valuefn;
pub mod verifier;

pub use phase_type::{PhaseTypeError, PhaseTypeModel, Transition};
pub use simulator::{estimate_value, simulate_path, SimConfig, SimEstimate};
pub use solver::{
    barrier_step, claim_value, hjb_residual, solve, value_update, RiskModel, RiskModelError,
    SolveError, SolveResult, SolverConfig,
};
pub use valuefn::{Grid, ValueFnError, ValueFunction};
pub use verifier::{verify_all, CheckRecord, CheckStatus, Tolerances, VerificationReport};
