//! Cost function `C(q) = min_t t - u(t·e - q)` and the prices it induces.
//!
//! The objective `φ(t) = t - u(t·e - q)` is convex for concave `u`, so its
//! derivative `g(t) = 1 - e·∇u(t·e - q)` is nondecreasing and the minimizer
//! is found by bisection on `g`. Utilities that are translation invariant
//! (`u(s + t·e) = u(s) + t`) make `φ` constant; those are detected up front
//! and solved at the canonical point `t = max_i q_i`.

use crate::error::{Result, ScpmError};
use crate::scalar::{max_of, sum, Scalar};
use crate::utility::Utility;

const G_TOL: f64 = 1e-10;
const FLAT_TOL: f64 = 1e-12;
const WIDTH_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const MAX_EXPANSIONS: usize = 128;
const SUM_EXACT_TOL: f64 = 1e-10;
const SUM_RENORM_TOL: f64 = 1e-8;
const NEG_PRICE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CostSolveResult<T> {
    pub t_star: T,
    pub cost: T,
    pub prices: Vec<T>,
    /// `φ` is constant in `t`; `t_star` is the canonical `max_i q_i`.
    pub flat_objective: bool,
    pub iterations: usize,
    /// Some price is below `-1e-10`; only possible for utilities that are
    /// not non-decreasing.
    pub negative_prices: bool,
}

fn shifted<T: Scalar>(t: T, q: &[T]) -> Vec<T> {
    q.iter().map(|&qi| t - qi).collect()
}

fn derivative<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T], t: T) -> Result<T> {
    Ok(T::one() - sum(&u.gradient(&shifted(t, q))?))
}

pub fn solve_t<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T]) -> Result<CostSolveResult<T>> {
    let n = u.n_outcomes();
    if q.len() != n {
        return Err(ScpmError::DimensionMismatch {
            expected: n,
            got: q.len(),
        });
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(ScpmError::InvalidParameter(
            "share vector must be finite".into(),
        ));
    }
    let q_max = max_of(q);
    let floor = u.domain_floor(q);
    let one = T::one();
    let two = T::lit(2.0);

    // Stay strictly inside the domain when it is bounded below.
    let inside = |t: T| {
        if floor.is_finite() {
            let margin = T::lit(1e-9) * floor.abs().max(one);
            t.max(floor + margin)
        } else {
            t
        }
    };
    let mut lo = inside(q_max - one);
    let mut hi = inside(q_max + one);
    if hi <= lo {
        hi = lo + one;
    }

    let g_lo = derivative(u, q, lo)?;
    let g_hi = derivative(u, q, hi)?;
    let mid = lo + (hi - lo) / two;
    let g_mid = derivative(u, q, mid)?;
    let flat_tol = T::tol(FLAT_TOL);
    if g_lo.abs() <= flat_tol && g_hi.abs() <= flat_tol && g_mid.abs() <= flat_tol {
        return finish(u, q, inside(q_max), true, 0);
    }

    let mut g_lo = g_lo;
    let mut g_hi = g_hi;
    let mut width = hi - lo;
    let mut expansions = 0;
    while g_lo > T::zero() {
        if expansions == MAX_EXPANSIONS {
            return Err(ScpmError::Unsolvable(
                "no lower bracket: e·∇u stays below 1".into(),
            ));
        }
        expansions += 1;
        width *= two;
        let next = if floor.is_finite() {
            // Halve the distance to the floor instead of crossing it.
            inside(floor + (lo - floor) / two)
        } else {
            lo - width
        };
        if next >= lo {
            return Err(ScpmError::Unsolvable(
                "lower bracket collapsed onto the domain floor".into(),
            ));
        }
        hi = lo;
        g_hi = g_lo;
        lo = next;
        g_lo = derivative(u, q, lo)?;
    }
    while g_hi < T::zero() {
        if expansions == MAX_EXPANSIONS {
            return Err(ScpmError::Unsolvable(
                "no upper bracket: e·∇u stays above 1".into(),
            ));
        }
        expansions += 1;
        width *= two;
        lo = hi;
        g_lo = g_hi;
        hi += width;
        g_hi = derivative(u, q, hi)?;
    }

    let g_tol = T::tol(G_TOL);
    let width_tol = T::tol(WIDTH_TOL);
    let (mut best_t, mut best_g) = if g_lo.abs() <= g_hi.abs() {
        (lo, g_lo)
    } else {
        (hi, g_hi)
    };
    let mut iterations = 0;
    while best_g.abs() > g_tol && hi - lo > width_tol && iterations < MAX_BISECTIONS {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let g = derivative(u, q, mid)?;
        if g.abs() < best_g.abs() {
            best_t = mid;
            best_g = g;
        }
        if g < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(u, q, best_t, false, iterations)
}

fn finish<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    q: &[T],
    t_star: T,
    flat_objective: bool,
    iterations: usize,
) -> Result<CostSolveResult<T>> {
    let s = shifted(t_star, q);
    let cost = t_star - u.value(&s)?;
    let mut prices = u.gradient(&s)?;
    let total = sum(&prices);
    let dev = (total - T::one()).abs();
    if dev > T::tol(SUM_RENORM_TOL) {
        return Err(ScpmError::SimplexViolation(total.as_f64()));
    }
    if dev > T::tol(SUM_EXACT_TOL) {
        prices.iter_mut().for_each(|p| *p /= total);
    }
    let negative_prices = prices.iter().any(|&p| p < -T::lit(NEG_PRICE_TOL));
    Ok(CostSolveResult {
        t_star,
        cost,
        prices,
        flat_objective,
        iterations,
        negative_prices,
    })
}

pub fn cost<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T]) -> Result<T> {
    Ok(solve_t(u, q)?.cost)
}

/// Instantaneous state prices `∇C(q)`.
pub fn prices<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T]) -> Result<Vec<T>> {
    Ok(solve_t(u, q)?.prices)
}

/// Checks that a bundle is finite, nonnegative and not identically zero.
pub(crate) fn validate_bundle<T: Scalar>(a: &[T], n: usize) -> Result<()> {
    if a.len() != n {
        return Err(ScpmError::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if a.iter().any(|x| !x.is_finite() || *x < T::zero()) || a.iter().all(|x| x.is_zero()) {
        return Err(ScpmError::DegenerateBundle);
    }
    Ok(())
}

/// Money charged for `x` units of bundle `a` at state `q`: `C(q + a·x) - C(q)`.
pub fn charge<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T], a: &[T], x: T) -> Result<T> {
    validate_bundle(a, u.n_outcomes())?;
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(ScpmError::InvalidParameter(format!(
            "quantity must be finite and nonnegative, got {x}"
        )));
    }
    if x.is_zero() {
        return Ok(T::zero());
    }
    let moved: Vec<T> = q.iter().zip(a).map(|(&qi, &ai)| qi + ai * x).collect();
    Ok(cost(u, &moved)? - cost(u, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{make_utility, UtilityKind, UtilitySpec};

    fn spec(kind: UtilityKind, b: f64, theta: Option<Vec<f64>>, n: usize) -> UtilitySpec<f64> {
        make_utility(kind, b, theta, n).unwrap()
    }

    #[test]
    fn lmsr_at_origin() {
        let u = spec(UtilityKind::Lmsr, 1.0, None, 2);
        let r = solve_t(&u, &[0.0, 0.0]).unwrap();
        assert!(r.flat_objective);
        assert_eq!(r.t_star, 0.0);
        assert!((r.cost - 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.prices, vec![0.5, 0.5]);
    }

    #[test]
    fn quadratic_score_is_flat() {
        let u = spec(UtilityKind::QuadraticScore, 1.0, None, 2);
        let r = solve_t(&u, &[1.0, 0.0]).unwrap();
        assert!(r.flat_objective);
        assert_eq!(r.t_star, 1.0);
        assert!((r.cost - 0.625).abs() < 1e-12);
        assert!((r.prices[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn log_scpm_at_origin() {
        let u = spec(UtilityKind::LogScpm, 1.0, Some(vec![1.0, 1.0]), 2);
        let r = solve_t(&u, &[0.0, 0.0]).unwrap();
        assert!(!r.flat_objective);
        assert!((r.t_star - 2.0).abs() < 1e-9);
        assert!((r.cost - (2.0 - 2.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn cost_examples() {
        let lmsr = spec(UtilityKind::Lmsr, 1.0, None, 2);
        let want = (1f64.exp() + 1.0).ln();
        assert!((cost(&lmsr, &[1.0, 0.0]).unwrap() - want).abs() < 1e-12);
        let min = spec(UtilityKind::MinScpm, 1.0, None, 3);
        assert_eq!(cost(&min, &[3.0, 1.0, 2.0]).unwrap(), 3.0);
    }

    #[test]
    fn translation_by_five() {
        for kind in UtilityKind::ALL {
            let u = spec(kind, 1.5, None, 3);
            let q = [0.3, -1.2, 2.0];
            let shifted: Vec<f64> = q.iter().map(|x| x + 5.0).collect();
            let d = cost(&u, &shifted).unwrap() - cost(&u, &q).unwrap();
            assert!((d - 5.0).abs() < 1e-8, "{kind}: {d}");
        }
    }

    #[test]
    fn price_examples() {
        let lmsr = spec(UtilityKind::Lmsr, 1.0, None, 2);
        let p = prices(&lmsr, &[1.0, 0.0]).unwrap();
        let e = 1f64.exp();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-12);

        let quad = spec(UtilityKind::QuadScpm, 1.0, Some(vec![0.5, 0.5]), 2);
        let r = solve_t(&quad, &[1.0, 0.0]).unwrap();
        assert!((r.t_star - 0.5).abs() < 1e-9);
        assert!((r.prices[0] - 0.75).abs() < 1e-9);
        assert!((r.prices[1] - 0.25).abs() < 1e-9);

        for kind in UtilityKind::ALL {
            let u = spec(kind, 2.0, None, 4);
            let p = prices(&u, &[3.0; 4]).unwrap();
            for pi in p {
                assert!((pi - 0.25).abs() < 1e-9, "{kind}");
            }
        }
    }

    #[test]
    fn charge_examples() {
        let lmsr = spec(UtilityKind::Lmsr, 1.0, None, 2);
        let want = ((1f64.exp() + 1.0) / 2.0).ln();
        let c = charge(&lmsr, &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((c - want).abs() < 1e-12);
        assert!((want - 0.620_115).abs() < 1e-6);
        assert_eq!(charge(&lmsr, &[0.4, 0.1], &[1.0, 1.0], 0.0).unwrap(), 0.0);

        let exp = spec(UtilityKind::ExponentialScpm, 1.0, None, 2);
        let c = charge(&exp, &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((c - want).abs() < 1e-9);
    }

    #[test]
    fn charge_rejects_degenerate_input() {
        let lmsr = spec(UtilityKind::Lmsr, 1.0, None, 2);
        assert_eq!(
            charge(&lmsr, &[0.0, 0.0], &[0.0, 0.0], 1.0),
            Err(ScpmError::DegenerateBundle)
        );
        assert_eq!(
            charge(&lmsr, &[0.0, 0.0], &[-1.0, 1.0], 1.0),
            Err(ScpmError::DegenerateBundle)
        );
        assert!(charge(&lmsr, &[0.0, 0.0], &[1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn exponential_cost_carries_the_b_factor() {
        // C(q) = b log(mean exp(q/b)); the variant without b would give log(...)
        let u = spec(UtilityKind::ExponentialScpm, 3.0, None, 2);
        let q = [2.0, -1.0];
        let want = 3.0 * (((2.0f64 / 3.0).exp() + (-1.0f64 / 3.0).exp()) / 2.0).ln();
        assert!((cost(&u, &q).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn quadratic_score_negative_prices_flagged() {
        let u = spec(UtilityKind::QuadraticScore, 1.0, None, 2);
        let r = solve_t(&u, &[0.0, 5.0]).unwrap();
        assert!(r.negative_prices);
        let lmsr = spec(UtilityKind::Lmsr, 1.0, None, 2);
        assert!(!solve_t(&lmsr, &[0.0, 5.0]).unwrap().negative_prices);
    }

    #[test]
    fn log_scpm_far_from_origin() {
        let u = spec(UtilityKind::LogScpm, 0.5, None, 3);
        let r = solve_t(&u, &[250.0, -40.0, 7.5]).unwrap();
        assert!((sum(&r.prices) - 1.0).abs() < 1e-8);
        assert!(r.t_star > 250.0);
    }

    #[test]
    fn dimension_mismatch() {
        let u = spec(UtilityKind::Lmsr, 1.0, None, 3);
        assert!(matches!(
            solve_t(&u, &[0.0, 0.0]),
            Err(ScpmError::DimensionMismatch { .. })
        ));
    }
}
