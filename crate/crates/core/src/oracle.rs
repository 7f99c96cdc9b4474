//! Brute-force reference computations.
//!
//! Nothing here calls the bisection solvers in [`crate::cost`] or the fill
//! search in [`crate::market`]: costs come from dense scans, charges from
//! trapezoid sums and fills from stepping through quantities. The utilities
//! themselves and the instantaneous prices are shared.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::cost;
use crate::error::{Result, ScpmError};
use crate::market::{Market, Order};
use crate::scalar::{dot, max_of, min_of, Scalar};
use crate::utility::Utility;

/// Number of Dirichlet samples used in place of a lattice above three outcomes.
pub const DIRICHLET_SAMPLES: usize = 100_000;
const MAX_SCAN_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub grid_points: usize,
    pub fd_step: f64,
    pub quad_panels: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_points: 100_000,
            fd_step: 1e-6,
            quad_panels: 10_000,
        }
    }
}

/// Scan bracket `[floor + δ, max q + 50(1 + scale)]`, with `min q - 50(1 + scale)`
/// as the lower end when the domain is unbounded.
pub fn default_bracket<T: Scalar, U: Utility<T> + ?Sized>(u: &U, q: &[T], scale: T) -> (T, T) {
    let pad = T::lit(50.0) * (T::one() + scale);
    let floor = u.domain_floor(q);
    let lo = if floor.is_finite() {
        floor + T::lit(1e-9) * floor.abs().max(T::one())
    } else {
        min_of(q) - pad
    };
    (lo, max_of(q) + pad)
}

fn scan_min<T: Scalar>(phi: &impl Fn(T) -> Option<T>, lo: T, hi: T, points: usize) -> (T, T) {
    let step = (hi - lo) / T::lit(points as f64);
    let mut best = (lo, T::infinity());
    for k in 0..=points {
        let t = lo + step * T::lit(k as f64);
        if let Some(v) = phi(t) {
            if v < best.1 {
                best = (t, v);
            }
        }
    }
    best
}

/// Minimizes `t - u(t·e - q)` by a dense scan over `bracket`, then rescans
/// the two cells around the best point once.
pub fn grid_min_t<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    q: &[T],
    bracket: (T, T),
    grid_points: usize,
) -> Result<(T, T)> {
    let (lo, hi) = bracket;
    if !(hi > lo) || grid_points == 0 {
        return Err(ScpmError::EmptyBracket {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let phi = |t: T| {
        let s: Vec<T> = q.iter().map(|&qi| t - qi).collect();
        u.value(&s).ok().map(|v| t - v).filter(|v| v.is_finite())
    };
    let (t0, v0) = scan_min(&phi, lo, hi, grid_points);
    if !v0.is_finite() {
        return Err(ScpmError::Unsolvable(
            "objective undefined over the bracket".into(),
        ));
    }
    let step = (hi - lo) / T::lit(grid_points as f64);
    let (t1, v1) = scan_min(&phi, (t0 - step).max(lo), (t0 + step).min(hi), grid_points);
    Ok(if v1 <= v0 { (t1, v1) } else { (t0, v0) })
}

/// Central differences. When `f` fails (typically a domain boundary) the step
/// is halved, down to `1e-10`.
pub fn finite_diff_gradient<T: Scalar>(
    f: impl Fn(&[T]) -> Result<T>,
    x: &[T],
    h: T,
) -> Result<Vec<T>> {
    let min_step = T::lit(1e-10);
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let mut step = h;
        loop {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            match (up, down) {
                (Ok(a), Ok(b)) => {
                    grad.push((a - b) / (step + step));
                    break;
                }
                _ => {
                    step /= T::lit(2.0);
                    if step < min_step {
                        return Err(ScpmError::FiniteDifference);
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// Trapezoid rule for `∫_0^x̄ p(q + a ε)·a dε`.
pub fn quadrature_charge<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    q: &[T],
    a: &[T],
    x_bar: T,
    panels: usize,
) -> Result<T> {
    if x_bar <= T::zero() || panels == 0 {
        return Ok(T::zero());
    }
    let h = x_bar / T::lit(panels as f64);
    let price = |eps: T| -> Result<T> {
        let moved: Vec<T> = q.iter().zip(a).map(|(&qi, &ai)| qi + ai * eps).collect();
        Ok(dot(&cost::prices(u, &moved)?, a))
    };
    let mut total = (price(T::zero())? + price(x_bar)?) / T::lit(2.0);
    for k in 1..panels {
        total += price(h * T::lit(k as f64))?;
    }
    Ok(total * h)
}

/// Steps `ε = 0, step, 2·step, …` while the bundle price stays at or below
/// the limit price and `ε` stays within the limit quantity.
pub fn brute_force_fill<T: Scalar, U: Utility<T>>(
    market: &Market<T, U>,
    order: &Order<T>,
    step: T,
) -> Result<T> {
    if !(step > T::zero()) {
        return Err(ScpmError::InvalidParameter(
            "scan step must be positive".into(),
        ));
    }
    order.validate(market.n_outcomes())?;
    let a = &order.bundle;
    let price = |eps: T| -> Result<T> {
        let moved: Vec<T> = market
            .q()
            .iter()
            .zip(a)
            .map(|(&qi, &ai)| qi + ai * eps)
            .collect();
        Ok(dot(&cost::prices(market.utility(), &moved)?, a))
    };
    if price(T::zero())? >= order.pi {
        return Ok(T::zero());
    }
    let mut accepted = T::zero();
    for k in 1..=MAX_SCAN_STEPS {
        let eps = step * T::lit(k as f64);
        if eps > order.limit || price(eps)? > order.pi {
            return Ok(accepted);
        }
        accepted = eps;
    }
    Err(ScpmError::UnboundedFill(order.pi.as_f64()))
}

/// Probability vectors covering the simplex: every lattice point with
/// coordinates `k / resolution` for up to three outcomes, otherwise
/// [`DIRICHLET_SAMPLES`] uniform (Dirichlet(1, …, 1)) draws.
pub fn simplex_grid<T: Scalar>(n: usize, resolution: usize, seed: u64) -> Vec<Vec<T>> {
    assert!(n >= 2 && resolution >= 2, "need n >= 2 and resolution >= 2");
    if n > 3 {
        return dirichlet_samples(n, DIRICHLET_SAMPLES, seed);
    }
    let r = T::lit(resolution as f64);
    let mut out = Vec::new();
    let mut counts = vec![0usize; n];
    compositions(resolution, 0, &mut counts, &mut |c| {
        out.push(c.iter().map(|&k| T::lit(k as f64) / r).collect());
    });
    out
}

fn compositions(left: usize, idx: usize, counts: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        counts[idx] = left;
        emit(counts);
        return;
    }
    for k in 0..=left {
        counts[idx] = k;
        compositions(left - k, idx + 1, counts, emit);
    }
}

pub fn dirichlet_samples<T: Scalar>(n: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|d| T::lit(d / total)).collect()
        })
        .collect()
}
