//! Sequential convex pari-mutuel market maker.
//!
//! A market is defined by a concave utility `u` over the organizer's surplus
//! in each outcome state. The cost of an outstanding share vector `q` is
//! `C(q) = min_t t - u(t·e - q)`, instantaneous prices are `∇C(q)`, and
//! limit orders are filled against those prices and charged either the cost
//! difference (truthful) or the final price.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar for the common cases.
//!
//! ```
//! use scpm::{make_utility, Market64, MarketConfig64, Order64, UtilityKind};
//!
//! let u = make_utility(UtilityKind::Lmsr, 1.0, None, 2).unwrap();
//! let mut market = Market64::new(MarketConfig64::new(u)).unwrap();
//! let fill = market
//!     .submit(&Order64::new("alice", 0.9, 1.0, vec![1.0, 0.0]))
//!     .unwrap();
//! assert!((fill.charge - 0.620115).abs() < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cost;
mod error;
pub mod market;
pub mod oracle;
mod scalar;
pub mod sim;
pub mod utility;
pub mod verify;

pub use cost::{charge, cost, prices, solve_t, CostSolveResult};
pub use error::{Result, ScpmError};
pub use market::{
    ChargingMode, FillResult, Market, MarketConfig, MarketConfigFile, Order, SettlementReport,
};
pub use scalar::{dot, log_sum_exp, max_abs_diff, max_of, min_of, sum, Scalar};
pub use utility::{make_utility, PenaltyValue, Utility, UtilityConfig, UtilityKind, UtilitySpec};

pub type UtilitySpec64 = UtilitySpec<f64>;
pub type UtilitySpec32 = UtilitySpec<f32>;
pub type Market64 = Market<f64>;
pub type Market32 = Market<f32>;
pub type MarketConfig64 = MarketConfig<f64>;
pub type MarketConfig32 = MarketConfig<f32>;
pub type Order64 = Order<f64>;
pub type Order32 = Order<f32>;
pub type FillResult64 = FillResult<f64>;
pub type FillResult32 = FillResult<f32>;
pub type SettlementReport64 = SettlementReport<f64>;
pub type SettlementReport32 = SettlementReport<f32>;
pub type CostSolveResult64 = CostSolveResult<f64>;
pub type CostSolveResult32 = CostSolveResult<f32>;
