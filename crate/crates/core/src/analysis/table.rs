//! Side-by-side summary of the catalog mechanisms.

use std::fmt;

use serde::Serialize;

use super::loss::{numeric_worst_case_loss, worst_case_loss};
use super::properness::{check_properness, maximize_tilted, probe_monotone};
use crate::error::Result;
use crate::oracle::{dirichlet_samples, simplex_grid};
use crate::scalar::{dot, sum, Scalar};
use crate::utility::{make_utility, Utility, UtilityKind, UtilitySpec};

const PROPERNESS_SAMPLES: usize = 40;
const MONOTONE_SAMPLES: usize = 400;
const PENALTY_RESOLUTION: usize = 10;
const PENALTY_SAMPLES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Properness {
    StrictlyProper,
    Proper,
    Improper,
}

impl fmt::Display for Properness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Properness::StrictlyProper => "strictly proper",
            Properness::Proper => "proper",
            Properness::Improper => "improper",
        })
    }
}

/// Candidate closed forms for the penalty `L(p)`, each up to an additive
/// constant. `prior` is `θ / Σθ` when the utility has weights, else uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PenaltyFamily {
    /// `b · KL(p ‖ prior)`
    KullbackLeibler,
    /// `-Σ w_i log p_i` with `w = θ` (or `b` on every outcome)
    LogLikelihood,
    /// `0`
    Zero,
    /// `b · ‖p - prior‖²`
    SquaredEuclidean,
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyFamily::KullbackLeibler => "b*KL(p||prior)",
            PenaltyFamily::LogLikelihood => "-sum w log p",
            PenaltyFamily::Zero => "0",
            PenaltyFamily::SquaredEuclidean => "b*|p-prior|^2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyFit {
    pub family: PenaltyFamily,
    /// Max deviation after the best additive constant.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub kind: UtilityKind,
    /// `None` when unbounded.
    pub loss_analytic: Option<f64>,
    pub loss_numeric: Option<f64>,
    pub properness: Properness,
    pub max_gradient_residual: f64,
    pub risk_measure: bool,
    pub penalty: Option<PenaltyFit>,
}

fn candidate<T: Scalar>(family: PenaltyFamily, u: &UtilitySpec<T>, p: &[T]) -> f64 {
    let n = u.n_outcomes();
    let b = u.b().as_f64();
    let p: Vec<f64> = p.iter().map(|x| x.as_f64()).collect();
    let weights: Vec<f64> = match u.theta() {
        Some(th) => th.iter().map(|x| x.as_f64()).collect(),
        None => vec![b; n],
    };
    let prior: Vec<f64> = match u.theta() {
        Some(th) => {
            let total = sum(th).as_f64();
            th.iter().map(|x| x.as_f64() / total).collect()
        }
        None => vec![1.0 / n as f64; n],
    };
    match family {
        PenaltyFamily::KullbackLeibler => {
            b * p
                .iter()
                .zip(&prior)
                .map(|(pi, wi)| if *pi > 0.0 { pi * (pi / wi).ln() } else { 0.0 })
                .sum::<f64>()
        }
        PenaltyFamily::LogLikelihood => -p
            .iter()
            .zip(&weights)
            .map(|(pi, w)| w * pi.ln())
            .sum::<f64>(),
        PenaltyFamily::Zero => 0.0,
        PenaltyFamily::SquaredEuclidean => {
            b * p
                .iter()
                .zip(&prior)
                .map(|(pi, qi)| (pi - qi).powi(2))
                .sum::<f64>()
        }
    }
}

/// Computes `L(p)` numerically on interior simplex points and picks the
/// candidate family with the smallest max deviation.
fn fit_penalty<T: Scalar>(u: &UtilitySpec<T>, seed: u64) -> Result<Option<PenaltyFit>> {
    let n = u.n_outcomes();
    let points: Vec<Vec<T>> = if n <= 3 {
        simplex_grid::<T>(n, PENALTY_RESOLUTION, seed)
            .into_iter()
            .filter(|p| p.iter().all(|x| *x > T::zero()))
            .collect()
    } else {
        dirichlet_samples::<f64>(n, PENALTY_SAMPLES, seed)
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|x| T::lit(0.9 * x + 0.1 / n as f64))
                    .collect()
            })
            .collect()
    };
    let mut numeric = Vec::with_capacity(points.len());
    let mut warm = None;
    for p in &points {
        let opt = match maximize_tilted(u, p, warm.clone()) {
            Ok(opt) => opt,
            Err(_) => return Ok(None),
        };
        numeric.push((u.value(&opt.s)? - dot(p, &opt.s)).as_f64());
        warm = Some(opt.s);
    }
    let families = [
        PenaltyFamily::KullbackLeibler,
        PenaltyFamily::LogLikelihood,
        PenaltyFamily::Zero,
        PenaltyFamily::SquaredEuclidean,
    ];
    let best = families
        .into_iter()
        .map(|family| {
            let diffs: Vec<f64> = points
                .iter()
                .zip(&numeric)
                .map(|(p, v)| v - candidate(family, u, p))
                .collect();
            let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
            PenaltyFit {
                family,
                max_deviation: (hi - lo) / 2.0,
            }
        })
        .min_by(|a, b| a.max_deviation.total_cmp(&b.max_deviation));
    Ok(best)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One row per catalog mechanism at liquidity `b` and `n` outcomes. `theta`
/// is passed to the mechanisms that take prior weights.
pub fn table1<T: Scalar>(
    b: T,
    n: usize,
    theta: Option<Vec<T>>,
    seed: u64,
) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for kind in UtilityKind::ALL {
        let th = if kind.uses_theta() {
            theta.clone()
        } else {
            None
        };
        let u = make_utility(kind, b, th, n)?;
        let analytic = worst_case_loss(&u);
        let numeric = numeric_worst_case_loss(&u, seed)?;
        let proper = check_properness(&u, PROPERNESS_SAMPLES, seed)?;
        let properness = if proper.strictly_proper {
            Properness::StrictlyProper
        } else if proper.proper {
            Properness::Proper
        } else {
            Properness::Improper
        };
        rows.push(Table1Row {
            kind,
            loss_analytic: finite(analytic.total.as_f64()),
            loss_numeric: finite(numeric.total.as_f64()),
            properness,
            max_gradient_residual: proper.max_gradient_residual.as_f64(),
            risk_measure: probe_monotone(&u, MONOTONE_SAMPLES, seed),
            penalty: fit_penalty(&u, seed)?,
        });
    }
    Ok(rows)
}
