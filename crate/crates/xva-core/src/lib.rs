//! Total valuation adjustments (XVA) for European claims under asymmetric
//! funding, repo and collateral rates with bilateral default risk.
//!
//! Three mutually cross-checking valuation routes:
//!
//! - [`closed_form`]: explicit equal-rates formulas, with and without
//!   default risk, including hedge ratios;
//! - [`bsde`]: the general nonlinear backward equation solved on a
//!   time × log-price lattice, yielding buyer and seller values and the
//!   no-arbitrage interval;
//! - [`mc`]: a seeded Monte Carlo evaluation of the default-risky
//!   representation, used as an independent oracle.
//!
//! [`market`] holds parameters and the no-arbitrage rate checks, [`analytic`]
//! the public Black-Scholes quote, [`closeout`] the default settlement rule,
//! [`replication`] a pathwise hedge backtest, and [`report`] the scenario
//! runner behind the `xva` command-line tool.

pub mod analytic;
pub mod bsde;
pub mod claim;
pub mod closed_form;
pub mod closeout;
pub mod error;
pub mod market;
pub mod math;
pub mod mc;
pub mod replication;
pub mod report;
pub mod scenario;

pub use claim::{ClaimSpec, Payoff, PayoffSign, PiecewiseLinear, TradeSide};
pub use closed_form::{HedgeReport, XvaBreakdown};
pub use error::{Result, XvaError};
pub use market::{CreditParams, EquityParams, MarketParams, RateSet, ValidationReport};
