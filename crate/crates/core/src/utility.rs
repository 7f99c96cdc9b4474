//! Concave utilities of the market organizer.
//!
//! A utility `u(s)` scores the organizer's surplus shares `s` (one entry per
//! outcome). The market maker prices orders by keeping `u` as large as
//! possible, so the shape of `u` decides the loss bound, the price dynamics
//! and the implied risk attitude. [`UtilitySpec`] covers the six catalog
//! mechanisms; anything else can plug in through the [`Utility`] trait.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScpmError};
use crate::scalar::{log_sum_exp, max_abs_diff, min_of, sum, Scalar};

/// Tolerance for deciding membership of the argmin set in the min utility.
const ARGMIN_TOL: f64 = 1e-12;
/// Looser active-set tolerance used when measuring subgradient residuals.
const ACTIVE_SET_TOL: f64 = 1e-9;
const SIMPLEX_TOL: f64 = 1e-10;

/// Raw concave conjugate `L(p) = sup_s u(s) - p·s` together with the value
/// shifted so that its minimum over the simplex is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyValue<T> {
    pub raw: T,
    pub normalized: T,
}

/// A concave utility over surplus-share vectors.
pub trait Utility<T: Scalar> {
    fn n_outcomes(&self) -> usize;

    fn value(&self, s: &[T]) -> Result<T>;

    /// Gradient, or a canonical subgradient where `u` is not differentiable.
    fn gradient(&self, s: &[T]) -> Result<Vec<T>>;

    /// Smallest `t` such that `t·e - q` lies in the domain for every larger
    /// `t`. `-inf` when the domain is all of `R^N`.
    fn domain_floor(&self, _q: &[T]) -> T {
        T::neg_infinity()
    }

    fn is_nondecreasing(&self) -> bool;

    fn conjugate_penalty(&self, _p: &[T]) -> Result<PenaltyValue<T>> {
        Err(ScpmError::Unsupported(
            "no closed-form penalty for this utility".into(),
        ))
    }

    /// Max-norm distance from `r` to the (sub)gradient set at `s`.
    fn subgradient_residual(&self, s: &[T], r: &[T]) -> Result<T> {
        Ok(max_abs_diff(&self.gradient(s)?, r))
    }

    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UtilityKind {
    #[serde(rename = "LMSR")]
    Lmsr,
    #[serde(rename = "QuadraticScore")]
    QuadraticScore,
    #[serde(rename = "LogSCPM")]
    LogScpm,
    #[serde(rename = "MinSCPM")]
    MinScpm,
    #[serde(rename = "ExponentialSCPM")]
    ExponentialScpm,
    #[serde(rename = "QuadSCPM")]
    QuadScpm,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 6] = [
        UtilityKind::Lmsr,
        UtilityKind::LogScpm,
        UtilityKind::MinScpm,
        UtilityKind::QuadraticScore,
        UtilityKind::ExponentialScpm,
        UtilityKind::QuadScpm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UtilityKind::Lmsr => "LMSR",
            UtilityKind::QuadraticScore => "QuadraticScore",
            UtilityKind::LogScpm => "LogSCPM",
            UtilityKind::MinScpm => "MinSCPM",
            UtilityKind::ExponentialScpm => "ExponentialSCPM",
            UtilityKind::QuadScpm => "QuadSCPM",
        }
    }

    /// Whether the kind is parameterized by prior weights.
    pub fn uses_theta(self) -> bool {
        matches!(
            self,
            UtilityKind::Lmsr | UtilityKind::LogScpm | UtilityKind::QuadScpm
        )
    }
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UtilityKind {
    type Err = ScpmError;

    fn from_str(s: &str) -> Result<Self> {
        UtilityKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ScpmError::InvalidParameter(format!("unknown utility kind {s:?}")))
    }
}

/// Serialized form of a utility, as found in market config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub kind: UtilityKind,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub n_outcomes: usize,
}

/// A validated catalog utility.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec<T> {
    kind: UtilityKind,
    b: T,
    theta: Vec<T>,
    n: usize,
}

/// Builds a catalog utility, filling in the default prior when `theta` is
/// omitted: all ones for LMSR, `b` on every outcome for the log utility and
/// the uniform distribution for the semi-quadratic one.
pub fn make_utility<T: Scalar>(
    kind: UtilityKind,
    b: T,
    theta: Option<Vec<T>>,
    n_outcomes: usize,
) -> Result<UtilitySpec<T>> {
    let n = n_outcomes;
    if n < 2 {
        return Err(ScpmError::InvalidParameter(format!(
            "need at least 2 outcomes, got {n}"
        )));
    }
    if !(b > T::zero()) || !b.is_finite() {
        return Err(ScpmError::InvalidParameter(format!(
            "b must be positive and finite, got {b}"
        )));
    }
    let theta = match theta {
        Some(_) if !kind.uses_theta() => {
            return Err(ScpmError::InvalidParameter(format!(
                "{kind} takes no theta"
            )))
        }
        Some(th) => th,
        None => match kind {
            UtilityKind::Lmsr => vec![T::one(); n],
            UtilityKind::LogScpm => vec![b; n],
            UtilityKind::QuadScpm => vec![T::one() / T::lit(n as f64); n],
            _ => Vec::new(),
        },
    };
    if kind.uses_theta() {
        if theta.len() != n {
            return Err(ScpmError::DimensionMismatch {
                expected: n,
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite() || *t < T::zero()) {
            return Err(ScpmError::InvalidParameter(
                "theta must be finite and nonnegative".into(),
            ));
        }
    }
    match kind {
        UtilityKind::QuadScpm => {
            let total = sum(&theta);
            if (total - T::one()).abs() > T::tol(1e-12) {
                return Err(ScpmError::InvalidParameter(format!(
                    "QuadSCPM theta must sum to 1, sums to {total}"
                )));
            }
        }
        UtilityKind::LogScpm | UtilityKind::Lmsr if theta.iter().any(|t| *t <= T::zero()) => {
            return Err(ScpmError::InvalidParameter(format!(
                "{kind} theta must be strictly positive"
            )));
        }
        _ => {}
    }
    Ok(UtilitySpec { kind, b, theta, n })
}

impl<T: Scalar> UtilitySpec<T> {
    pub fn from_config(cfg: &UtilityConfig) -> Result<Self> {
        make_utility(
            cfg.kind,
            T::lit(cfg.b),
            cfg.theta
                .as_ref()
                .map(|th| th.iter().map(|&x| T::lit(x)).collect()),
            cfg.n_outcomes,
        )
    }

    pub fn to_config(&self) -> UtilityConfig {
        UtilityConfig {
            kind: self.kind,
            b: self.b.as_f64(),
            theta: self
                .theta()
                .map(|th| th.iter().map(|x| x.as_f64()).collect()),
            n_outcomes: self.n,
        }
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn theta(&self) -> Option<&[T]> {
        self.kind.uses_theta().then_some(self.theta.as_slice())
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.n {
            return Err(ScpmError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn n_t(&self) -> T {
        T::lit(self.n as f64)
    }

    fn mean(&self, s: &[T]) -> T {
        sum(s) / self.n_t()
    }

    fn argmin_mask(s: &[T], tol: f64) -> Vec<bool> {
        let m = min_of(s);
        let slack = T::tol(tol) * m.abs().max(T::one());
        s.iter().map(|&x| x - m <= slack).collect()
    }
}

fn check_simplex<T: Scalar>(p: &[T]) -> Result<()> {
    if p.iter()
        .any(|x| !x.is_finite() || *x < -T::tol(SIMPLEX_TOL))
    {
        return Err(ScpmError::NotOnSimplex(
            "negative or non-finite entry".into(),
        ));
    }
    let total = sum(p);
    if (total - T::one()).abs() > T::tol(SIMPLEX_TOL) {
        return Err(ScpmError::NotOnSimplex(format!("entries sum to {total}")));
    }
    Ok(())
}

/// `Σ p_i log(p_i / w_i)` with `0 log 0 = 0`.
fn relative_entropy<T: Scalar>(p: &[T], w: impl Fn(usize) -> T) -> T {
    p.iter().enumerate().fold(T::zero(), |acc, (i, &pi)| {
        if pi <= T::zero() {
            acc
        } else {
            acc + pi * (pi / w(i)).ln()
        }
    })
}

impl<T: Scalar> Utility<T> for UtilitySpec<T> {
    fn n_outcomes(&self) -> usize {
        self.n
    }

    fn value(&self, s: &[T]) -> Result<T> {
        self.check_len(s)?;
        let b = self.b;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        Ok(match self.kind {
            UtilityKind::Lmsr => {
                -b * log_sum_exp(self.theta.iter().zip(s).map(|(&th, &si)| th.ln() - si / b))
            }
            UtilityKind::QuadraticScore => {
                let mean = self.mean(s);
                let spread = s
                    .iter()
                    .fold(T::zero(), |acc, &si| acc + (si - mean) * (si - mean));
                mean - spread / (four * b)
            }
            UtilityKind::LogScpm => {
                if s.iter().any(|&si| !(si > T::zero())) {
                    return Err(ScpmError::OutOfDomain);
                }
                self.theta
                    .iter()
                    .zip(s)
                    .fold(T::zero(), |acc, (&th, &si)| acc + th * si.ln())
            }
            UtilityKind::MinScpm => min_of(s),
            UtilityKind::ExponentialScpm => {
                let tail = s.iter().fold(T::zero(), |acc, &si| acc + (-si / b).exp());
                b * (T::one() - tail / self.n_t())
            }
            UtilityKind::QuadScpm => self.theta.iter().zip(s).fold(T::zero(), |acc, (&th, &si)| {
                let v = si.min(two * b * th);
                acc + th * v - v * v / (four * b)
            }),
        })
    }

    fn gradient(&self, s: &[T]) -> Result<Vec<T>> {
        self.check_len(s)?;
        let b = self.b;
        let two = T::lit(2.0);
        Ok(match self.kind {
            UtilityKind::Lmsr => {
                let z: Vec<T> = self
                    .theta
                    .iter()
                    .zip(s)
                    .map(|(&th, &si)| th.ln() - si / b)
                    .collect();
                let lse = log_sum_exp(z.iter().copied());
                z.into_iter().map(|zi| (zi - lse).exp()).collect()
            }
            UtilityKind::QuadraticScore => {
                let mean = self.mean(s);
                let base = T::one() / self.n_t();
                s.iter().map(|&si| base + (mean - si) / (two * b)).collect()
            }
            UtilityKind::LogScpm => {
                if s.iter().any(|&si| !(si > T::zero())) {
                    return Err(ScpmError::OutOfDomain);
                }
                self.theta.iter().zip(s).map(|(&th, &si)| th / si).collect()
            }
            UtilityKind::MinScpm => {
                let mask = Self::argmin_mask(s, ARGMIN_TOL);
                let k = T::lit(mask.iter().filter(|&&m| m).count() as f64);
                mask.into_iter()
                    .map(|m| if m { T::one() / k } else { T::zero() })
                    .collect()
            }
            UtilityKind::ExponentialScpm => {
                let n = self.n_t();
                s.iter().map(|&si| (-si / b).exp() / n).collect()
            }
            UtilityKind::QuadScpm => self
                .theta
                .iter()
                .zip(s)
                .map(|(&th, &si)| (th - si / (two * b)).max(T::zero()))
                .collect(),
        })
    }

    fn domain_floor(&self, q: &[T]) -> T {
        match self.kind {
            UtilityKind::LogScpm => q.iter().fold(T::neg_infinity(), |a, &x| a.max(x)),
            _ => T::neg_infinity(),
        }
    }

    fn is_nondecreasing(&self) -> bool {
        self.kind != UtilityKind::QuadraticScore
    }

    fn conjugate_penalty(&self, p: &[T]) -> Result<PenaltyValue<T>> {
        self.check_len(p)?;
        check_simplex(p)?;
        let b = self.b;
        match self.kind {
            UtilityKind::Lmsr => {
                let alpha = sum(&self.theta);
                let kl = relative_entropy(p, |i| self.theta[i] / alpha);
                Ok(PenaltyValue {
                    raw: b * kl - b * alpha.ln(),
                    normalized: b * kl,
                })
            }
            UtilityKind::LogScpm => {
                let alpha = sum(&self.theta);
                let mut raw = T::zero();
                for (&th, &pi) in self.theta.iter().zip(p) {
                    if pi <= T::zero() {
                        return Ok(PenaltyValue {
                            raw: T::infinity(),
                            normalized: T::infinity(),
                        });
                    }
                    raw += th * (th / pi).ln() - th;
                }
                Ok(PenaltyValue {
                    raw,
                    normalized: raw - (alpha * alpha.ln() - alpha),
                })
            }
            UtilityKind::MinScpm => Ok(PenaltyValue {
                raw: T::zero(),
                normalized: T::zero(),
            }),
            UtilityKind::ExponentialScpm => {
                let n = self.n_t();
                let kl = relative_entropy(p, |_| T::one() / n);
                Ok(PenaltyValue {
                    raw: b * kl,
                    normalized: b * kl,
                })
            }
            UtilityKind::QuadScpm => {
                let d = self
                    .theta
                    .iter()
                    .zip(p)
                    .fold(T::zero(), |acc, (&th, &pi)| acc + (pi - th) * (pi - th));
                Ok(PenaltyValue {
                    raw: b * d,
                    normalized: b * d,
                })
            }
            UtilityKind::QuadraticScore => Err(ScpmError::Unsupported(
                "the quadratic scoring rule utility is not non-decreasing and has no risk-measure penalty"
                    .into(),
            )),
        }
    }

    fn subgradient_residual(&self, s: &[T], r: &[T]) -> Result<T> {
        if self.kind != UtilityKind::MinScpm {
            return Ok(max_abs_diff(&self.gradient(s)?, r));
        }
        self.check_len(s)?;
        // Subdifferential is the simplex over the active set.
        let active = Self::argmin_mask(s, ACTIVE_SET_TOL);
        let k = T::lit(active.iter().filter(|&&a| a).count() as f64);
        let (outside_max, outside_mass) = active
            .iter()
            .zip(r)
            .filter(|(a, _)| !**a)
            .fold((T::zero(), T::zero()), |(mx, mass), (_, &ri)| {
                (mx.max(ri.abs()), mass + ri)
            });
        Ok(outside_max.max(outside_mass.abs() / k))
    }

    fn name(&self) -> String {
        self.kind.to_string()
    }
}
