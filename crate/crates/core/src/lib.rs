//! Pricing library for variable annuities carrying a guaranteed minimum
//! withdrawal benefit (GMWB) and an optional surrender feature.
//!
//! The holder of such a contract invests a premium in a risky fund and is
//! guaranteed to recover the full premium through periodic withdrawals, no
//! matter how the fund performs. Withdrawals above the contractual rate are
//! penalised, and the contract may allow early termination (surrender) for a
//! penalised cash value. Pricing under optimal policyholder behaviour is a
//! discrete-time stochastic control problem with optional stopping.
//!
//! The solver steps a value surface backward in time over a wealth/guarantee
//! grid: between withdrawal dates the continuation value is a lognormal
//! expectation evaluated by Gauss-Hermite quadrature on a cubic-spline
//! interpolation of the surface, and at each withdrawal date a jump condition
//! maximises over the admissible withdrawal (and surrender) actions.
//!
//! Crate layout:
//! - [`contract`] — contract terms, market parameters, cashflow functions.
//! - [`mathkit`] — Gauss-Hermite rules and natural cubic splines.
//! - [`engine`] — the backward-induction solver over the (W, A) grid.
//! - [`feesolver`] — inversion of price to the fair annual fee.
//! - [`mc`] — Monte Carlo cross-validation (static strategy and exported
//!   policy maps).

pub mod contract;
pub mod engine;
pub mod feesolver;
pub mod mathkit;
pub mod mc;

pub use contract::{ContractSpec, MarketParams, State, SurrenderPenalty};
pub use engine::{GridConfig, GridSpec, PricingResult, StrategyKind};
pub use feesolver::{fair_fee, FairFeeResult, FeeSolveConfig};
pub use mc::{mc_price_static, McConfig, McEstimate};
