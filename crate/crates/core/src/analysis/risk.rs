//! Convex risk measure `ρ(Z) = min_t t - u(Z + t·e)` of a non-decreasing
//! utility, and its dual over probability vectors.
//!
//! Conjugacy gives `ρ(Z) = -min_p { E_p[Z] + L(p) }` with `L` the raw
//! concave conjugate. [`DualCheck`] also carries the un-negated minimum so
//! both sign conventions can be reported.

use crate::cost;
use crate::error::{Result, ScpmError};
use crate::oracle::simplex_grid;
use crate::scalar::{dot, Scalar};
use crate::utility::Utility;

#[derive(Debug, Clone, PartialEq)]
pub struct DualCheck<T> {
    /// `-min_p { E_p[Z] + L(p) }` over the grid.
    pub value: T,
    /// `min_p { E_p[Z] + L(p) }` itself.
    pub min_expected_plus_penalty: T,
    pub gap: T,
    pub grid_points: usize,
    pub argmin: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEvaluation<T> {
    pub rho: T,
    pub t_star: T,
    pub dual: Option<DualCheck<T>>,
}

fn require_monotone<T: Scalar, U: Utility<T> + ?Sized>(u: &U) -> Result<()> {
    if u.is_nondecreasing() {
        Ok(())
    } else {
        Err(ScpmError::NonMonotoneUtility(format!(
            "{} can decrease in some state, so t - u(Z + t·e) does not define a monotone risk measure",
            u.name()
        )))
    }
}

/// `ρ(Z)`, solved as the cost of the share vector `-Z`.
pub fn risk_measure<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    z: &[T],
) -> Result<RiskEvaluation<T>> {
    require_monotone(u)?;
    let q: Vec<T> = z.iter().map(|&x| -x).collect();
    let solved = cost::solve_t(u, &q)?;
    Ok(RiskEvaluation {
        rho: solved.cost,
        t_star: solved.t_star,
        dual: None,
    })
}

/// `ρ(Z)` together with its dual evaluated on a simplex grid (lattice with
/// `resolution` steps for up to three outcomes, Dirichlet samples above).
pub fn risk_dual_check<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    z: &[T],
    resolution: usize,
    seed: u64,
) -> Result<RiskEvaluation<T>> {
    let mut eval = risk_measure(u, z)?;
    let grid = simplex_grid::<T>(u.n_outcomes(), resolution, seed);
    let mut best = (T::infinity(), Vec::new());
    for p in &grid {
        let v = dot(p, z) + u.conjugate_penalty(p)?.raw;
        if v < best.0 {
            best = (v, p.clone());
        }
    }
    let value = -best.0;
    eval.dual = Some(DualCheck {
        value,
        min_expected_plus_penalty: best.0,
        gap: (eval.rho - value).abs(),
        grid_points: grid.len(),
        argmin: best.1,
    });
    Ok(eval)
}
