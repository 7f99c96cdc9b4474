//! Market state, quoting, limit-order fills and settlement.
//!
//! A fill accepts the largest quantity `x ∈ [0, limit]` such that the
//! instantaneous bundle price after the trade does not exceed the order's
//! limit price. The bundle price is nondecreasing in `x`, so `x` is found by
//! bisection. [`Market::fill`] is pure; [`Market::apply`] commits a fill.

use serde::{Deserialize, Serialize};

use crate::analysis::worst_case_loss;
use crate::cost::{self, validate_bundle};
use crate::error::{Result, ScpmError};
use crate::scalar::{dot, Scalar};
use crate::utility::{Utility, UtilityConfig, UtilitySpec};

const MAX_FILL_EXPANSIONS: usize = 100;
const MAX_FILL_BISECTIONS: usize = 200;
const FILL_REL_TOL: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChargingMode {
    /// Cost-function difference, i.e. the integral of instantaneous prices.
    #[default]
    Integral,
    /// Every accepted share pays the post-trade bundle price.
    FinalPrice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig<T> {
    pub utility: UtilitySpec<T>,
    pub charging_mode: ChargingMode,
    pub initial_q: Vec<T>,
}

/// On-disk market configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_outcomes: Option<usize>,
    pub utility: UtilityConfig,
    #[serde(default)]
    pub charging_mode: ChargingMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_q: Option<Vec<f64>>,
}

impl<T: Scalar> MarketConfig<T> {
    pub fn new(utility: UtilitySpec<T>) -> Self {
        let n = utility.n_outcomes();
        MarketConfig {
            utility,
            charging_mode: ChargingMode::Integral,
            initial_q: vec![T::zero(); n],
        }
    }

    pub fn with_mode(mut self, mode: ChargingMode) -> Self {
        self.charging_mode = mode;
        self
    }

    pub fn with_initial_q(mut self, q: Vec<T>) -> Self {
        self.initial_q = q;
        self
    }

    pub fn from_file(cfg: &MarketConfigFile) -> Result<Self> {
        let utility = UtilitySpec::from_config(&cfg.utility)?;
        let n = utility.n_outcomes();
        if let Some(declared) = cfg.n_outcomes {
            if declared != n {
                return Err(ScpmError::DimensionMismatch {
                    expected: declared,
                    got: n,
                });
            }
        }
        let initial_q = match &cfg.initial_q {
            Some(q) => q.iter().map(|&x| T::lit(x)).collect(),
            None => vec![T::zero(); n],
        };
        Ok(MarketConfig {
            utility,
            charging_mode: cfg.charging_mode,
            initial_q,
        })
    }
}

/// A limit order for `limit` units of `bundle` at no more than `pi` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Order<T> {
    pub trader_id: String,
    pub pi: T,
    /// `+inf` for an order without a quantity cap.
    pub limit: T,
    pub bundle: Vec<T>,
}

impl<T: Scalar> Order<T> {
    pub fn new(trader_id: impl Into<String>, pi: T, limit: T, bundle: Vec<T>) -> Self {
        Order {
            trader_id: trader_id.into(),
            pi,
            limit,
            bundle,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !self.pi.is_finite() || self.pi < T::zero() {
            return Err(ScpmError::InvalidOrder(format!(
                "limit price must be finite and nonnegative, got {}",
                self.pi
            )));
        }
        if self.limit.is_nan() || self.limit <= T::zero() {
            return Err(ScpmError::InvalidOrder(format!(
                "limit quantity must be positive, got {}",
                self.limit
            )));
        }
        validate_bundle(&self.bundle, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillResult<T> {
    pub order: Order<T>,
    pub x_bar: T,
    pub charge: T,
    pub prices_before: Vec<T>,
    pub prices_after: Vec<T>,
    pub mode: ChargingMode,
    /// Share vector the fill was computed against.
    pub q_before: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettlementReport<T> {
    pub outcome: usize,
    pub payout: T,
    pub organizer_profit: T,
    /// `B + C(q0)`, `None` when the utility has unbounded worst-case loss.
    pub loss_bound: Option<T>,
    pub bound_check: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Market<T, U = UtilitySpec<T>> {
    utility: U,
    mode: ChargingMode,
    initial_q: Vec<T>,
    q: Vec<T>,
    collected: T,
    journal: Vec<FillResult<T>>,
}

impl<T: Scalar> Market<T> {
    pub fn new(config: MarketConfig<T>) -> Result<Self> {
        Market::with_utility(config.utility, config.charging_mode, config.initial_q)
    }

    /// Settles the market on `outcome`: the organizer pays one unit per
    /// outstanding share of that outcome.
    pub fn settle(&self, outcome: usize) -> Result<SettlementReport<T>> {
        let n = self.q.len();
        if outcome >= n {
            return Err(ScpmError::InvalidOutcome { index: outcome, n });
        }
        let payout = self.q[outcome];
        let organizer_profit = self.collected - payout;
        let loss = worst_case_loss(&self.utility);
        let loss_bound = if loss.bound.is_finite() {
            Some(loss.bound + cost::cost(&self.utility, &self.initial_q)?)
        } else {
            None
        };
        let bound_check = loss_bound.map(|lb| organizer_profit >= -lb - T::lit(BOUND_SLACK));
        Ok(SettlementReport {
            outcome,
            payout,
            organizer_profit,
            loss_bound,
            bound_check,
        })
    }
}

impl<T: Scalar, U: Utility<T>> Market<T, U> {
    pub fn with_utility(utility: U, mode: ChargingMode, initial_q: Vec<T>) -> Result<Self> {
        let n = utility.n_outcomes();
        if initial_q.len() != n {
            return Err(ScpmError::DimensionMismatch {
                expected: n,
                got: initial_q.len(),
            });
        }
        if initial_q.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(ScpmError::InvalidParameter(
                "initial shares must be finite and nonnegative".into(),
            ));
        }
        Ok(Market {
            utility,
            mode,
            q: initial_q.clone(),
            initial_q,
            collected: T::zero(),
            journal: Vec::new(),
        })
    }

    pub fn utility(&self) -> &U {
        &self.utility
    }

    pub fn mode(&self) -> ChargingMode {
        self.mode
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn collected(&self) -> T {
        self.collected
    }

    pub fn journal(&self) -> &[FillResult<T>] {
        &self.journal
    }

    pub fn n_outcomes(&self) -> usize {
        self.q.len()
    }

    pub fn prices(&self) -> Result<Vec<T>> {
        cost::prices(&self.utility, &self.q)
    }

    /// Instantaneous price of one unit of `bundle`.
    pub fn quote(&self, bundle: &[T]) -> Result<T> {
        validate_bundle(bundle, self.q.len())?;
        Ok(dot(&self.prices()?, bundle))
    }

    fn moved(&self, a: &[T], x: T) -> Vec<T> {
        self.q.iter().zip(a).map(|(&qi, &ai)| qi + ai * x).collect()
    }

    fn bundle_price_at(&self, a: &[T], x: T) -> Result<T> {
        Ok(dot(&cost::prices(&self.utility, &self.moved(a, x))?, a))
    }

    /// Largest accepted quantity for `order` at the current state.
    pub fn accepted_quantity(&self, order: &Order<T>) -> Result<T> {
        order.validate(self.q.len())?;
        let a = &order.bundle;
        let pi = order.pi;
        // A tie with the current price admits no growth.
        if self.bundle_price_at(a, T::zero())? >= pi {
            return Ok(T::zero());
        }
        let two = T::lit(2.0);
        let mut lo = T::zero();
        let mut hi;
        if order.limit.is_finite() {
            if self.bundle_price_at(a, order.limit)? <= pi {
                return Ok(order.limit);
            }
            hi = order.limit;
        } else {
            hi = T::one();
            let mut expansions = 0;
            loop {
                // Losing the price simplex this far out means the price never crossed `pi`.
                match self.bundle_price_at(a, hi) {
                    Ok(p) if p > pi => break,
                    Ok(_) => {}
                    Err(ScpmError::SimplexViolation(_)) => {
                        return Err(ScpmError::UnboundedFill(pi.as_f64()))
                    }
                    Err(e) => return Err(e),
                }
                expansions += 1;
                if expansions > MAX_FILL_EXPANSIONS || !(hi * two).is_finite() {
                    return Err(ScpmError::UnboundedFill(pi.as_f64()));
                }
                lo = hi;
                hi *= two;
            }
        }
        let tol = T::tol(FILL_REL_TOL) * hi.max(T::one());
        for _ in 0..MAX_FILL_BISECTIONS {
            if hi - lo <= tol {
                break;
            }
            let mid = lo + (hi - lo) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.bundle_price_at(a, mid)? <= pi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Computes the fill for `order` without changing the market.
    pub fn fill(&self, order: &Order<T>) -> Result<FillResult<T>> {
        let x_bar = self.accepted_quantity(order)?;
        let a = &order.bundle;
        let before = cost::solve_t(&self.utility, &self.q)?;
        let (charge, prices_after) = if x_bar.is_zero() {
            (T::zero(), before.prices.clone())
        } else {
            let after = cost::solve_t(&self.utility, &self.moved(a, x_bar))?;
            let charge = match self.mode {
                ChargingMode::Integral => after.cost - before.cost,
                ChargingMode::FinalPrice => x_bar * dot(&after.prices, a),
            };
            (charge, after.prices)
        };
        Ok(FillResult {
            order: order.clone(),
            x_bar,
            charge,
            prices_before: before.prices,
            prices_after,
            mode: self.mode,
            q_before: self.q.clone(),
        })
    }

    /// Commits a fill produced by [`Market::fill`] against the current state.
    pub fn apply(&mut self, fill: FillResult<T>) -> Result<()> {
        if fill.q_before != self.q || fill.mode != self.mode {
            return Err(ScpmError::StaleFill);
        }
        for (qi, &ai) in self.q.iter_mut().zip(&fill.order.bundle) {
            *qi += ai * fill.x_bar;
        }
        self.collected += fill.charge;
        self.journal.push(fill);
        Ok(())
    }

    /// `fill` followed by `apply`.
    pub fn submit(&mut self, order: &Order<T>) -> Result<&FillResult<T>> {
        let fill = self.fill(order)?;
        self.apply(fill)?;
        Ok(self.journal.last().expect("just appended"))
    }
}
