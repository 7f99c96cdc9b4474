use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost;
use crate::error::{Result, ScpmError};
use crate::oracle::dirichlet_samples;
use crate::scalar::{dot, Scalar};
use crate::utility::Utility;

const RESIDUAL_TOL: f64 = 1e-6;
const INNER_RESIDUAL_TOL: f64 = 1e-10;
const MAX_INNER_SWEEPS: usize = 5_000;
const MAX_BRACKET: usize = 200;
const MAX_BISECT: usize = 200;
const PROBE_DIRECTIONS: usize = 8;
const PROBE_STEP: f64 = 1e-5;
const KINK_TOL: f64 = 1e-3;
/// Mixing weight pulling Dirichlet samples away from the simplex boundary.
const INTERIOR_MIX: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct PropernessReport<T> {
    pub proper: bool,
    pub strictly_proper: bool,
    pub max_gradient_residual: T,
    /// Some optimum admits several prices (a kink in `u`).
    pub multiplicity_detected: bool,
    pub samples: usize,
    /// Samples where the inner solver found no allocation with `∇u = r`.
    pub failures: Vec<String>,
}

/// Maximizer of `u(s) - r·s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedOptimum<T> {
    pub s: Vec<T>,
    pub value: T,
    pub residual: T,
}

/// Solves `max_s u(s) - r·s` by cyclic coordinate updates. Each update finds
/// the root of the nonincreasing partial derivative `∂_j u - r_j` by bracket
/// expansion and bisection.
pub fn maximize_tilted<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    r: &[T],
    start: Option<Vec<T>>,
) -> Result<TiltedOptimum<T>> {
    let n = u.n_outcomes();
    if r.len() != n {
        return Err(ScpmError::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let mut s = start.unwrap_or_else(|| vec![T::zero(); n]);
    let mut shift = T::one();
    while u.value(&s).is_err() {
        s.iter_mut().for_each(|x| *x += shift);
        shift *= T::lit(2.0);
        if !shift.is_finite() {
            return Err(ScpmError::OutOfDomain);
        }
    }
    let partial = |s: &[T], j: usize| -> T {
        match u.gradient(s) {
            Ok(g) => g[j] - r[j],
            // Outside the domain, which lies below it: push upward.
            Err(_) => T::infinity(),
        }
    };
    let two = T::lit(2.0);
    let mut residual = u.subgradient_residual(&s, r)?;
    for _ in 0..MAX_INNER_SWEEPS {
        if residual <= T::tol(INNER_RESIDUAL_TOL) {
            break;
        }
        let mut moved = false;
        for j in 0..n {
            let mut probe = s.clone();
            let x0 = s[j];
            let h0 = partial(&probe, j);
            if h0 == T::zero() {
                continue;
            }
            let mut step = x0.abs().max(T::one());
            let (mut lo, mut hi) = (x0, x0);
            let mut found = false;
            for _ in 0..MAX_BRACKET {
                let x = if h0 > T::zero() { x0 + step } else { x0 - step };
                probe[j] = x;
                let h = partial(&probe, j);
                if (h0 > T::zero()) == (h <= T::zero()) {
                    if h0 > T::zero() {
                        hi = x;
                    } else {
                        lo = x;
                    }
                    found = true;
                    break;
                }
                if h0 > T::zero() {
                    lo = x;
                } else {
                    hi = x;
                }
                step *= two;
            }
            if !found {
                return Err(ScpmError::Unsolvable(format!(
                    "partial derivative {j} never reaches {}",
                    r[j]
                )));
            }
            for _ in 0..MAX_BISECT {
                let mid = lo + (hi - lo) / two;
                if mid <= lo || mid >= hi || hi - lo <= T::tol(1e-13) * mid.abs().max(T::one()) {
                    break;
                }
                probe[j] = mid;
                if partial(&probe, j) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = lo + (hi - lo) / two;
            if x != s[j] {
                s[j] = x;
                moved = true;
            }
        }
        residual = u.subgradient_residual(&s, r)?;
        if !moved {
            break;
        }
    }
    let value = u.value(&s)? - dot(r, &s);
    Ok(TiltedOptimum { s, value, residual })
}

/// One-sided directional derivatives disagree along some direction, i.e.
/// the superdifferential at `s` is not a single point.
fn has_kink<T: Scalar, U: Utility<T> + ?Sized>(u: &U, s: &[T], rng: &mut ChaCha8Rng) -> bool {
    let h = T::lit(PROBE_STEP);
    let Ok(base) = u.value(s) else { return false };
    for _ in 0..PROBE_DIRECTIONS {
        let d: Vec<f64> = (0..s.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step: Vec<T> = d.iter().map(|x| T::lit(x / norm) * h).collect();
        let plus: Vec<T> = s.iter().zip(&step).map(|(&a, &b)| a + b).collect();
        let minus: Vec<T> = s.iter().zip(&step).map(|(&a, &b)| a - b).collect();
        let (Ok(up), Ok(down)) = (u.value(&plus), u.value(&minus)) else {
            continue;
        };
        let forward = (up - base) / h;
        let backward = (base - down) / h;
        if (forward - backward).abs() > T::lit(KINK_TOL) {
            return true;
        }
    }
    false
}

/// Checks that `∇u` reaches random interior probability vectors (properness)
/// and probes whether the reaching allocation pins down a unique price
/// (strictness).
pub fn check_properness<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    n_samples: usize,
    seed: u64,
) -> Result<PropernessReport<T>> {
    if n_samples == 0 {
        return Err(ScpmError::InvalidParameter(
            "n_samples must be at least 1".into(),
        ));
    }
    let n = u.n_outcomes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beliefs: Vec<Vec<T>> = dirichlet_samples::<f64>(n, n_samples, seed)
        .into_iter()
        .map(|p| {
            p.into_iter()
                .map(|x| T::lit((1.0 - INTERIOR_MIX) * x + INTERIOR_MIX / n as f64))
                .collect()
        })
        .collect();
    let mut max_residual = T::zero();
    let mut multiplicity = false;
    let mut failures = Vec::new();
    for r in &beliefs {
        match maximize_tilted(u, r, None) {
            Ok(opt) => {
                max_residual = max_residual.max(opt.residual);
                multiplicity |= has_kink(u, &opt.s, &mut rng);
            }
            Err(e) => {
                max_residual = T::infinity();
                failures.push(format!("r = {r:?}: {e}"));
            }
        }
    }
    let proper = failures.is_empty() && max_residual <= T::lit(RESIDUAL_TOL);
    Ok(PropernessReport {
        proper,
        strictly_proper: proper && !multiplicity,
        max_gradient_residual: max_residual,
        multiplicity_detected: multiplicity,
        samples: n_samples,
        failures,
    })
}

/// Scores `S_i = q_i - C(q) + K` of the scoring rule a market implements,
/// with the additive constant `K` fixed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRuleView<T> {
    pub scores: Vec<T>,
    pub constant: T,
}

pub fn implicit_scoring_rule<T: Scalar, U: Utility<T> + ?Sized>(
    u: &U,
    q: &[T],
) -> Result<ScoringRuleView<T>> {
    let c = cost::cost(u, q)?;
    Ok(ScoringRuleView {
        scores: q.iter().map(|&qi| qi - c).collect(),
        constant: T::zero(),
    })
}

/// Empirical non-decreasing test: `u(s + δ e_i) >= u(s)` on random points
/// drawn at several scales.
pub fn probe_monotone<T: Scalar, U: Utility<T> + ?Sized>(u: &U, samples: usize, seed: u64) -> bool {
    let n = u.n_outcomes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slack = T::lit(1e-12);
    for k in 0..samples {
        let scale = 10f64.powi((k % 4) as i32);
        let mut s: Vec<T> = (0..n)
            .map(|_| T::lit(rng.gen_range(-scale..scale)))
            .collect();
        let mut shift = T::one();
        while u.value(&s).is_err() {
            s.iter_mut().for_each(|x| *x += shift);
            shift *= T::lit(2.0);
        }
        let i = rng.gen_range(0..n);
        let delta = T::lit(rng.gen_range(0.0..scale));
        let base = u.value(&s).expect("feasible");
        s[i] += delta;
        if let Ok(v) = u.value(&s) {
            if v < base - slack * base.abs().max(T::one()) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::{make_utility, UtilityKind};

    struct Linear {
        c: Vec<f64>,
    }

    impl Utility<f64> for Linear {
        fn n_outcomes(&self) -> usize {
            self.c.len()
        }
        fn value(&self, s: &[f64]) -> Result<f64> {
            Ok(dot(&self.c, s))
        }
        fn gradient(&self, _s: &[f64]) -> Result<Vec<f64>> {
            Ok(self.c.clone())
        }
        fn is_nondecreasing(&self) -> bool {
            true
        }
        fn name(&self) -> String {
            "linear".into()
        }
    }

    #[test]
    fn catalog_verdicts() {
        let lmsr = make_utility(UtilityKind::Lmsr, 1.0, None, 3).unwrap();
        let rep = check_properness(&lmsr, 30, 1).unwrap();
        assert!(rep.proper && rep.strictly_proper, "{rep:?}");

        let min = make_utility(UtilityKind::MinScpm, 1.0, None, 3).unwrap();
        let rep = check_properness(&min, 30, 1).unwrap();
        assert!(rep.proper && !rep.strictly_proper, "{rep:?}");
        assert!(rep.multiplicity_detected);

        let lin = Linear { c: vec![0.3, 0.7] };
        let rep = check_properness(&lin, 10, 1).unwrap();
        assert!(!rep.proper && !rep.strictly_proper);
        assert_eq!(rep.failures.len(), 10);
    }

    #[test]
    fn tilted_optimum_for_log_utility() {
        let u = make_utility(UtilityKind::LogScpm, 1.0f64, Some(vec![1.0, 2.0]), 2).unwrap();
        let opt = maximize_tilted(&u, &[0.25, 0.75], None).unwrap();
        // s_i = θ_i / r_i
        assert!((opt.s[0] - 4.0).abs() < 1e-8 && (opt.s[1] - 8.0 / 3.0).abs() < 1e-8);
        let pen = u.conjugate_penalty(&[0.25, 0.75]).unwrap();
        assert!((opt.value - pen.raw).abs() < 1e-9);
    }

    #[test]
    fn scoring_rule_examples() {
        let lmsr = make_utility(UtilityKind::Lmsr, 1.0f64, None, 2).unwrap();
        let view = implicit_scoring_rule(&lmsr, &[1.0, 0.0]).unwrap();
        assert!((view.scores[0] - view.scores[1] - 1.0).abs() < 1e-12);
        let p = cost::prices(&lmsr, &[1.0, 0.0]).unwrap();
        assert!(((p[0] / p[1]).ln() - 1.0).abs() < 1e-12);
        assert_eq!(view.constant, 0.0);

        let sym = implicit_scoring_rule(&lmsr, &[2.0, 2.0]).unwrap();
        assert_eq!(sym.scores[0], sym.scores[1]);

        let qs = make_utility(UtilityKind::QuadraticScore, 1.0f64, None, 2).unwrap();
        let view = implicit_scoring_rule(&qs, &[1.0, 0.0]).unwrap();
        let p = cost::prices(&qs, &[1.0, 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        // 2b r_i - b Σ r_j^2 differences: 2 (p_1 - p_2)
        let d = view.scores[0] - view.scores[1];
        assert!((d - 2.0 * (p[0] - p[1])).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_probe_flags_only_quadratic_score() {
        for kind in UtilityKind::ALL {
            let u = make_utility(kind, 1.0, None, 3).unwrap();
            assert_eq!(probe_monotone(&u, 400, 3), u.is_nondecreasing(), "{kind}");
        }
    }
}
