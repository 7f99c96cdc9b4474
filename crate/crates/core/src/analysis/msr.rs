//! Market scoring rules run through the convex market engine.
//!
//! A scoring-rule market maker with cost `C` is the same mechanism as the
//! engine driven by `u(s) = -C(-s)`. [`msr_equivalence_check`] replays random
//! orders through both and reports how far they drift apart. The direct side
//! inverts the closed-form bundle price instead of searching for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpmError};
use crate::market::{ChargingMode, Market, Order};
use crate::scalar::{log_sum_exp, sum, Scalar};
use crate::utility::Utility;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MsrRule {
    Lmsr,
    Quadratic,
}

/// `C(q)`: `b log Σ exp(q_i / b)` or `mean(q) + (1/4b) Σ (q_i - mean)^2`.
pub fn closed_form_cost<T: Scalar>(rule: MsrRule, b: T, q: &[T]) -> T {
    match rule {
        MsrRule::Lmsr => b * log_sum_exp(q.iter().map(|&x| x / b)),
        MsrRule::Quadratic => {
            let m = sum(q) / T::lit(q.len() as f64);
            m + q.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m)) / (T::lit(4.0) * b)
        }
    }
}

pub fn closed_form_prices<T: Scalar>(rule: MsrRule, b: T, q: &[T]) -> Vec<T> {
    let n = T::lit(q.len() as f64);
    match rule {
        MsrRule::Lmsr => {
            let lse = log_sum_exp(q.iter().map(|&x| x / b));
            q.iter().map(|&x| (x / b - lse).exp()).collect()
        }
        MsrRule::Quadratic => {
            let m = sum(q) / n;
            q.iter()
                .map(|&x| T::one() / n + (x - m) / (T::lit(2.0) * b))
                .collect()
        }
    }
}

/// The utility `u(s) = -C(-s)` induced by a scoring rule's cost function.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrUtility<T> {
    pub rule: MsrRule,
    pub b: T,
    pub n: usize,
}

impl<T: Scalar> Utility<T> for MsrUtility<T> {
    fn n_outcomes(&self) -> usize {
        self.n
    }

    fn value(&self, s: &[T]) -> Result<T> {
        let neg: Vec<T> = s.iter().map(|&x| -x).collect();
        Ok(-closed_form_cost(self.rule, self.b, &neg))
    }

    fn gradient(&self, s: &[T]) -> Result<Vec<T>> {
        let neg: Vec<T> = s.iter().map(|&x| -x).collect();
        Ok(closed_form_prices(self.rule, self.b, &neg))
    }

    fn is_nondecreasing(&self) -> bool {
        self.rule == MsrRule::Lmsr
    }

    fn name(&self) -> String {
        format!("{:?}-derived", self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport<T> {
    pub rule: MsrRule,
    pub orders: usize,
    /// Orders both sides rejected outright.
    pub rejected_both: usize,
    pub max_x_discrepancy: T,
    pub max_charge_discrepancy: T,
}

/// Quantity a scoring-rule market accepts for a 0/1 bundle, from the
/// closed-form bundle price.
fn direct_fill<T: Scalar>(rule: MsrRule, b: T, q: &[T], order: &Order<T>) -> T {
    let pi = order.pi;
    let inside: Vec<bool> = order.bundle.iter().map(|&a| a > T::zero()).collect();
    let p = closed_form_prices(rule, b, q);
    let p_bundle = p
        .iter()
        .zip(&inside)
        .fold(T::zero(), |acc, (&pi, &i)| if i { acc + pi } else { acc });
    if p_bundle >= pi {
        return T::zero();
    }
    let k = inside.iter().filter(|&&i| i).count();
    let n = q.len();
    if k == n {
        // The full set always costs 1.
        return if pi > T::one() {
            T::infinity()
        } else {
            T::zero()
        };
    }
    let x = match rule {
        MsrRule::Lmsr => {
            // W_S e^{x/b} / (W_S e^{x/b} + W_rest) = π
            let log_w = |want: bool| {
                log_sum_exp(
                    q.iter()
                        .zip(&inside)
                        .filter(|(_, &i)| i == want)
                        .map(|(&qi, _)| qi / b),
                )
            };
            if pi >= T::one() {
                T::infinity()
            } else {
                b * ((pi / (T::one() - pi)).ln() + log_w(false) - log_w(true))
            }
        }
        MsrRule::Quadratic => {
            // The bundle price grows linearly with slope k (n - k) / (2 b n).
            let slope = T::lit((k * (n - k)) as f64) / (T::lit(2.0) * b * T::lit(n as f64));
            (pi - p_bundle) / slope
        }
    };
    x.max(T::zero()).min(order.limit)
}

fn random_msr_order<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, id: usize) -> Order<T> {
    let mut bundle = vec![T::zero(); n];
    loop {
        for a in bundle.iter_mut() {
            *a = if rng.gen_bool(0.5) {
                T::one()
            } else {
                T::zero()
            };
        }
        if bundle.iter().any(|a| !a.is_zero()) {
            break;
        }
    }
    let pi = T::lit(rng.gen_range(0.02..0.98));
    let limit = if rng.gen_bool(0.25) {
        T::infinity()
    } else {
        T::lit(rng.gen_range(0.1..3.0))
    };
    Order::new(format!("msr-{id}"), pi, limit, bundle)
}

/// Replays `n_orders` random 0/1-bundle orders through the engine (utility
/// `-C(-s)`, integral charging) and through direct cost-difference charging.
pub fn msr_equivalence_check<T: Scalar>(
    rule: MsrRule,
    b: T,
    n: usize,
    n_orders: usize,
    seed: u64,
) -> Result<EquivalenceReport<T>> {
    if n < 2 || !(b > T::zero()) {
        return Err(ScpmError::InvalidParameter("need n >= 2 and b > 0".into()));
    }
    let utility = MsrUtility { rule, b, n };
    let mut engine = Market::with_utility(utility, ChargingMode::Integral, vec![T::zero(); n])?;
    let mut direct_q = vec![T::zero(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivalenceReport {
        rule,
        orders: n_orders,
        rejected_both: 0,
        max_x_discrepancy: T::zero(),
        max_charge_discrepancy: T::zero(),
    };
    for id in 0..n_orders {
        let order = random_msr_order(&mut rng, n, id);
        let x_direct = direct_fill(rule, b, &direct_q, &order);
        let moved: Vec<T> = direct_q
            .iter()
            .zip(&order.bundle)
            .map(|(&q, &a)| q + a * x_direct)
            .collect();
        let charge_direct =
            closed_form_cost(rule, b, &moved) - closed_form_cost(rule, b, &direct_q);
        direct_q = moved;

        let fill = engine.submit(&order)?;
        if fill.x_bar.is_zero() && x_direct.is_zero() {
            report.rejected_both += 1;
        }
        report.max_x_discrepancy = report.max_x_discrepancy.max((fill.x_bar - x_direct).abs());
        report.max_charge_discrepancy = report
            .max_charge_discrepancy
            .max((fill.charge - charge_direct).abs());
    }
    Ok(report)
}
