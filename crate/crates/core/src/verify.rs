//! Oracle-versus-engine cross-checks behind the `verify` command.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost;
use crate::error::{Result, ScpmError};
use crate::market::{ChargingMode, Market, Order};
use crate::oracle::{
    brute_force_fill, default_bracket, grid_min_t, quadrature_charge, OracleConfig,
};
use crate::utility::{make_utility, UtilityKind, UtilitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScope {
    Cost,
    Charge,
    Fill,
    All,
}

impl VerifyScope {
    fn includes(self, other: VerifyScope) -> bool {
        self == VerifyScope::All || self == other
    }
}

impl FromStr for VerifyScope {
    type Err = ScpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cost" => Ok(VerifyScope::Cost),
            "charge" => Ok(VerifyScope::Charge),
            "fill" => Ok(VerifyScope::Fill),
            "all" => Ok(VerifyScope::All),
            _ => Err(ScpmError::InvalidParameter(format!(
                "unknown verify scope {s:?}"
            ))),
        }
    }
}

impl fmt::Display for VerifyScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifyScope::Cost => "cost",
            VerifyScope::Charge => "charge",
            VerifyScope::Fill => "fill",
            VerifyScope::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub scope: VerifyScope,
    /// Multiplies every tolerance. `0` turns the suite into a negative control.
    pub tolerance_scale: f64,
    pub seed: u64,
    pub n_outcomes: usize,
    pub b: f64,
    pub cost_cases: usize,
    pub charge_cases: usize,
    pub fill_cases: usize,
    pub fill_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            scope: VerifyScope::All,
            tolerance_scale: 1.0,
            seed: 0,
            n_outcomes: 3,
            b: 1.0,
            cost_cases: 200,
            charge_cases: 10,
            fill_cases: 20,
            fill_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub scope: VerifyScope,
    pub utility: UtilityKind,
    pub input: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationSummary {
    pub checks: Vec<CheckOutcome>,
}

impl VerificationSummary {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    /// Check count, failure count and worst absolute discrepancy for `scope`.
    pub fn scope_stats(&self, scope: VerifyScope) -> (usize, usize, f64) {
        let mut total = 0;
        let mut failed = 0;
        let mut worst = 0.0f64;
        for c in self.checks.iter().filter(|c| c.scope == scope) {
            total += 1;
            failed += usize::from(!c.passed);
            worst = worst.max(c.discrepancy);
        }
        (total, failed, worst)
    }
}

fn random_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..5.0)).collect()
}

fn random_bundle(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n];
    while a.iter().all(|&x| x == 0.0) {
        for x in a.iter_mut() {
            *x = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        }
    }
    a
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

struct Recorder<'a> {
    opts: &'a VerifyOptions,
    out: &'a mut VerificationSummary,
}

impl Recorder<'_> {
    fn record(
        &mut self,
        scope: VerifyScope,
        u: &UtilitySpec<f64>,
        input: String,
        discrepancy: f64,
        base_tol: f64,
    ) {
        let tolerance = base_tol * self.opts.tolerance_scale;
        self.out.checks.push(CheckOutcome {
            scope,
            utility: u.kind(),
            input,
            discrepancy,
            tolerance,
            passed: discrepancy <= tolerance && tolerance > 0.0,
        });
    }
}

/// Runs the selected oracle suites on every catalog utility.
pub fn run_verification(opts: &VerifyOptions) -> Result<VerificationSummary> {
    let mut summary = VerificationSummary::default();
    let oracle = OracleConfig::default();
    let n = opts.n_outcomes;
    for (k, kind) in UtilityKind::ALL.into_iter().enumerate() {
        let u = make_utility(kind, opts.b, None, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        let mut rec = Recorder {
            opts,
            out: &mut summary,
        };

        if opts.scope.includes(VerifyScope::Cost) {
            for _ in 0..opts.cost_cases {
                let q = random_q(&mut rng, n);
                let (_, oracle_cost) =
                    grid_min_t(&u, &q, default_bracket(&u, &q, opts.b), oracle.grid_points)?;
                let engine = cost::cost(&u, &q)?;
                rec.record(
                    VerifyScope::Cost,
                    &u,
                    format!("q={}", fmt_vec(&q)),
                    (oracle_cost - engine).abs(),
                    1e-6,
                );
            }
        }

        if opts.scope.includes(VerifyScope::Charge) {
            let tol = if kind == UtilityKind::MinScpm {
                1e-3
            } else {
                1e-4
            };
            for _ in 0..opts.charge_cases {
                let q = random_q(&mut rng, n);
                let a = random_bundle(&mut rng, n);
                let x = rng.gen_range(0.1..3.0);
                let quad = quadrature_charge(&u, &q, &a, x, oracle.quad_panels)?;
                let engine = cost::charge(&u, &q, &a, x)?;
                rec.record(
                    VerifyScope::Charge,
                    &u,
                    format!("q={} a={} x={x:.6}", fmt_vec(&q), fmt_vec(&a)),
                    (quad - engine).abs(),
                    tol,
                );
            }
        }

        if opts.scope.includes(VerifyScope::Fill) {
            for i in 0..opts.fill_cases {
                let q = random_q(&mut rng, n);
                let market = Market::with_utility(u.clone(), ChargingMode::Integral, q.clone())?;
                let a = random_bundle(&mut rng, n);
                let pi = rng.gen_range(0.05..0.95);
                let limit = if rng.gen_bool(0.25) {
                    f64::INFINITY
                } else {
                    rng.gen_range(0.1..3.0)
                };
                let order = Order::new(format!("v{i}"), pi, limit, a);
                let scan = brute_force_fill(&market, &order, opts.fill_step)?;
                let engine = market.fill(&order)?.x_bar;
                rec.record(
                    VerifyScope::Fill,
                    &u,
                    format!(
                        "q={} a={} pi={pi:.6} l={limit}",
                        fmt_vec(&q),
                        fmt_vec(&order.bundle)
                    ),
                    (scan - engine).abs(),
                    2.0 * opts.fill_step,
                );
            }
        }
    }
    Ok(summary)
}
