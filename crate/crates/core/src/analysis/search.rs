//! Derivative-free helpers for maximizing concave functions.

use crate::scalar::Scalar;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_REL_TOL: f64 = 1e-10;
const MAX_GOLDEN: usize = 200;
const MAX_SWEEPS: usize = 500;
const SWEEP_REL_TOL: f64 = 1e-13;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// `-inf` marks points outside the domain, which must lie to the left of it.
pub(crate) fn golden_max<T: Scalar>(mut f: impl FnMut(T) -> T, mut lo: T, mut hi: T) -> (T, T) {
    let r = T::lit(INV_PHI);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..MAX_GOLDEN {
        let scale = x1.abs().max(x2.abs()).max(T::one());
        if hi - lo <= T::tol(GOLDEN_REL_TOL) * scale {
            break;
        }
        let both_outside = f1 == T::neg_infinity() && f2 == T::neg_infinity();
        if f1 < f2 || both_outside {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    // Box edges are candidates too: monotone objectives peak there.
    let (fl, fh) = (f(lo), f(hi));
    [(x1, f1), (x2, f2), (lo, fl), (hi, fh)]
        .into_iter()
        .fold(
            (x1, T::neg_infinity()),
            |best, c| if c.1 > best.1 { c } else { best },
        )
}

/// Cyclic coordinate ascent inside the box `[-radius, radius]^N`. Each
/// coordinate is maximized exactly (to golden-section precision); a move is
/// kept only when it improves the objective.
pub(crate) fn coordinate_ascent<T: Scalar>(f: &impl Fn(&[T]) -> T, s: &mut [T], radius: T) -> T {
    let mut value = f(s);
    let mut trial = s.to_vec();
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for j in 0..s.len() {
            trial.copy_from_slice(s);
            let (x, fx) = golden_max(
                |x| {
                    trial[j] = x;
                    f(&trial)
                },
                -radius,
                radius,
            );
            if fx > value {
                s[j] = x;
                value = fx;
            }
        }
        if before.is_finite() && value - before <= T::tol(SWEEP_REL_TOL) * value.abs().max(T::one())
        {
            break;
        }
        if !value.is_finite() && !before.is_finite() {
            break;
        }
    }
    value
}

/// Shifts `s` along `e` until `f` is finite there (domains in the catalog
/// are closed under adding positive multiples of `e`).
pub(crate) fn make_feasible<T: Scalar>(f: &impl Fn(&[T]) -> T, s: &mut [T]) -> bool {
    let mut shift = T::one();
    for _ in 0..200 {
        if f(s).is_finite() {
            return true;
        }
        s.iter_mut().for_each(|x| *x += shift);
        shift *= T::lit(2.0);
    }
    f(s).is_finite()
}
