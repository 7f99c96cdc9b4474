use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::search::{coordinate_ascent, make_feasible};
use crate::cost;
use crate::error::Result;
use crate::scalar::{min_of, sum, Scalar};
use crate::utility::{Utility, UtilityKind, UtilitySpec};

const STARTS: usize = 10;
const FIRST_BOX: f64 = 1e2;
const LAST_BOX: f64 = 1e8;
const UNBOUNDED_VALUE: f64 = 1e6;
const LEVEL_REL_TOL: f64 = 1e-6;

/// Worst-case organizer loss `B + C(0)`, where
/// `B = max_i sup_s u(s) - s_i`. Unbounded values are `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBound<T> {
    pub bound: T,
    pub c0: T,
    pub total: T,
    /// Taken from the catalog rather than a numeric search.
    pub analytic: bool,
}

impl<T: Scalar> LossBound<T> {
    fn new(bound: T, c0: T, analytic: bool) -> Self {
        let total = if bound.is_finite() {
            bound + c0
        } else {
            T::infinity()
        };
        LossBound {
            bound,
            c0,
            total,
            analytic,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.total.is_finite()
    }
}

/// Catalog values of `B` and `C(0)`.
pub fn worst_case_loss<T: Scalar>(u: &UtilitySpec<T>) -> LossBound<T> {
    let b = u.b();
    let n = T::lit(u.n_outcomes() as f64);
    let zero = T::zero();
    let (bound, c0) = match u.kind() {
        UtilityKind::Lmsr => {
            // With prior weights θ: C(0) = b log Σθ and B = -b log min θ.
            let theta = u.theta().expect("LMSR carries theta");
            (-b * min_of(theta).ln(), b * sum(theta).ln())
        }
        UtilityKind::QuadraticScore => (b * (T::one() - T::one() / n), zero),
        UtilityKind::LogScpm => {
            let alpha = sum(u.theta().expect("LogSCPM carries theta"));
            (T::infinity(), alpha * (T::one() - alpha.ln()))
        }
        UtilityKind::MinScpm => (zero, zero),
        UtilityKind::ExponentialScpm => (b * n.ln(), zero),
        UtilityKind::QuadScpm => {
            let theta = u.theta().expect("QuadSCPM carries theta");
            let sq = theta.iter().fold(zero, |acc, &t| acc + t * t);
            (b * (T::one() + sq - T::lit(2.0) * min_of(theta)), zero)
        }
    };
    LossBound::new(bound, c0, true)
}

/// Numeric `B` by coordinate ascent on `u(s) - s_i` from random starts,
/// escalating the search box tenfold from `1e2` to `1e8`. The search stops
/// once a larger box no longer improves the maximum; it declares the loss
/// unbounded if the maximum passes `1e6` or is still growing at the last box.
pub fn numeric_worst_case_loss<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    seed: u64,
) -> Result<LossBound<T>> {
    let n = u.n_outcomes();
    let c0 = cost::cost(u, &vec![T::zero(); n])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warm: Vec<Option<Vec<T>>> = vec![None; n];
    let mut previous: Option<T> = None;
    let mut radius = FIRST_BOX;
    while radius <= LAST_BOX {
        let r = T::lit(radius);
        let mut level_best = T::neg_infinity();
        for (i, warm_i) in warm.iter_mut().enumerate() {
            let objective = |s: &[T]| match u.value(s) {
                Ok(v) if v.is_finite() => v - s[i],
                _ => T::neg_infinity(),
            };
            let mut starts: Vec<Vec<T>> = (0..STARTS)
                .map(|_| {
                    (0..n)
                        .map(|_| T::lit(rng.gen_range(-radius..radius)))
                        .collect()
                })
                .collect();
            if let Some(w) = warm_i.take() {
                starts.push(w);
            }
            let mut best_i = (T::neg_infinity(), None);
            for mut s in starts {
                if !make_feasible(&objective, &mut s) {
                    continue;
                }
                s.iter_mut().for_each(|x| *x = x.max(-r).min(r));
                let v = coordinate_ascent(&objective, &mut s, r);
                if v > best_i.0 {
                    best_i = (v, Some(s));
                }
            }
            *warm_i = best_i.1;
            level_best = level_best.max(best_i.0);
        }
        if level_best > T::lit(UNBOUNDED_VALUE) {
            return Ok(LossBound::new(T::infinity(), c0, false));
        }
        if let Some(prev) = previous {
            let slack = T::lit(LEVEL_REL_TOL) * level_best.abs().max(T::one());
            if level_best - prev <= slack {
                return Ok(LossBound::new(level_best, c0, false));
            }
        }
        previous = Some(level_best);
        radius *= 10.0;
    }
    Ok(LossBound::new(T::infinity(), c0, false))
}
