use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scpm::analysis::{
    check_properness, closed_form_cost, closed_form_prices, msr_equivalence_check,
    numeric_worst_case_loss, risk_dual_check, risk_measure, worst_case_loss, MsrRule,
};
use scpm::sim::{random_orders, read_orders, run_convergence, run_simulation, AgentSpec};
use scpm::verify::{run_verification, VerifyOptions, VerifyScope};
use scpm::{
    cost, make_utility, prices, ChargingMode, Market64, MarketConfig64, Order64, Result, ScpmError,
    Utility, UtilityKind, UtilitySpec64,
};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, limit: f64) -> std::result::Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || {
        format!("took {:.2}s, budget {limit}s", elapsed.as_secs_f64())
    })
}

fn spec(kind: UtilityKind, b: f64, n: usize) -> UtilitySpec64 {
    make_utility(kind, b, None, n).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

const GRID: [(f64, usize); 6] = [
    (1.0, 2),
    (1.0, 5),
    (1.0, 10),
    (10.0, 2),
    (10.0, 5),
    (10.0, 10),
];

fn loss_column() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (b, n) in GRID {
        let nf = n as f64;
        for kind in UtilityKind::ALL {
            let u = spec(kind, b, n);
            let numeric = numeric_worst_case_loss(&u, 7).map_err(|e| e.to_string())?;
            let expected = match kind {
                UtilityKind::Lmsr | UtilityKind::ExponentialScpm => b * nf.ln(),
                UtilityKind::QuadraticScore | UtilityKind::QuadScpm => b * (nf - 1.0) / nf,
                UtilityKind::MinScpm => 0.0,
                UtilityKind::LogScpm => f64::INFINITY,
            };
            let analytic = worst_case_loss(&u).total;
            if expected.is_infinite() {
                ensure(!numeric.is_bounded() && !analytic.is_finite(), || {
                    format!("{kind} b={b} N={n} not declared unbounded: {numeric:?}")
                })?;
                continue;
            }
            let rel = |x: f64| (x - expected).abs() / expected.abs().max(1.0);
            worst = worst.max(rel(numeric.total));
            ensure(rel(numeric.total) <= 1e-6 && rel(analytic) <= 1e-12, || {
                format!(
                    "{kind} b={b} N={n}: numeric {} analytic {analytic} expected {expected}",
                    numeric.total
                )
            })?;
        }
    }
    within_budget(start.elapsed(), 10.0)?;
    Ok(format!("36 cells, worst relative error {worst:.1e}"))
}

fn lmsr_closed_form() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (b, n) in GRID {
        let u = spec(UtilityKind::Lmsr, b, n);
        for _ in 0..1000 {
            let q = random_vec(&mut rng, n, -5.0 * b, 5.0 * b);
            let c = cost(&u, &q).map_err(|e| e.to_string())?;
            let p = prices(&u, &q).map_err(|e| e.to_string())?;
            worst = worst.max((c - closed_form_cost(MsrRule::Lmsr, b, &q)).abs());
            for (a, w) in p.iter().zip(closed_form_prices(MsrRule::Lmsr, b, &q)) {
                worst = worst.max((a - w).abs());
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max discrepancy {worst:.3e}"))?;
    within_budget(start.elapsed(), 5.0)?;
    Ok(format!("6000 share vectors, max discrepancy {worst:.1e}"))
}

fn simplex_and_translation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_sum = 0.0f64;
    let mut worst_shift = 0.0f64;
    for kind in UtilityKind::ALL {
        let u = spec(kind, 1.0, 3);
        for _ in 0..1000 {
            let q = random_vec(&mut rng, 3, 0.0, 5.0);
            let p = prices(&u, &q).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
            let d = rng.gen_range(-5.0..5.0);
            let moved: Vec<f64> = q.iter().map(|x| x + d).collect();
            let c0 = cost(&u, &q).map_err(|e| e.to_string())?;
            let c1 = cost(&u, &moved).map_err(|e| e.to_string())?;
            worst_shift = worst_shift.max((c1 - c0 - d).abs());
        }
    }
    ensure(worst_sum <= 1e-8 && worst_shift <= 1e-8, || {
        format!("|sum p - 1| {worst_sum:.3e}, translation {worst_shift:.3e}")
    })?;
    Ok(format!(
        "|sum p - 1| <= {worst_sum:.1e}, translation error <= {worst_shift:.1e}"
    ))
}

/// An uncapped order at a limit price of 1 never stops filling; its profit
/// tends to minus infinity.
fn profit(market: &Market64, order: &Order64, gamma: f64) -> Result<f64> {
    match market.fill(order) {
        Ok(fill) => Ok(gamma * fill.x_bar - fill.charge),
        Err(ScpmError::UnboundedFill(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Best declared limit prices on the 101-point grid.
fn best_declarations(
    market: &Market64,
    gamma: f64,
    limit: f64,
    bundle: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let values = grid
        .iter()
        .map(|&pi| {
            profit(
                market,
                &Order64::new("t", pi, limit, bundle.to_vec()),
                gamma,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * best.abs().max(1.0);
    let argmax = grid
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= best - slack)
        .map(|(&p, _)| p)
        .collect();
    Ok((argmax, values))
}

fn truthfulness() -> Outcome {
    let smooth = [
        UtilityKind::Lmsr,
        UtilityKind::LogScpm,
        UtilityKind::QuadraticScore,
        UtilityKind::ExponentialScpm,
        UtilityKind::QuadScpm,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut cases = 0;
    let mut witness = None;
    while cases < 20 {
        let kind = smooth[rng.gen_range(0..smooth.len())];
        let n = rng.gen_range(2..=4);
        let u = spec(kind, rng.gen_range(0.5..3.0), n);
        let q = random_vec(&mut rng, n, 0.0, 2.0);
        let mut bundle = vec![0.0; n];
        bundle[rng.gen_range(0..n)] = 1.0;
        let limit = if rng.gen_bool(0.3) {
            f64::INFINITY
        } else {
            rng.gen_range(0.2..4.0)
        };
        let integral = Market64::with_utility(u.clone(), ChargingMode::Integral, q.clone())
            .map_err(|e| e.to_string())?;
        let p0 = integral.quote(&bundle).map_err(|e| e.to_string())?;
        let lo = ((p0 + 0.05) * 100.0).ceil() as i64;
        if lo > 95 {
            continue;
        }
        let gamma = rng.gen_range(lo..=95) as f64 / 100.0;
        cases += 1;
        let (argmax, _) =
            best_declarations(&integral, gamma, limit, &bundle).map_err(|e| e.to_string())?;
        ensure(
            argmax.iter().any(|&p| (p - gamma).abs() <= 0.01 + 1e-12),
            || format!("{kind} q={q:?} gamma={gamma} limit={limit}: best declarations {argmax:?}"),
        )?;

        if witness.is_none() {
            let fp = Market64::with_utility(u, ChargingMode::FinalPrice, q)
                .map_err(|e| e.to_string())?;
            let (argmax, values) =
                best_declarations(&fp, gamma, limit, &bundle).map_err(|e| e.to_string())?;
            let truthful = values[(gamma * 100.0).round() as usize];
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best > truthful + 1e-9 && argmax.iter().all(|&p| (p - gamma).abs() > 1e-12) {
                witness = Some(format!(
                    "{kind} gamma={gamma:.2} best pi={:.2} gains {:.3e}",
                    argmax[0],
                    best - truthful
                ));
            }
        }
    }
    let witness = witness.ok_or("no final-price non-truthfulness witness found")?;
    Ok(format!(
        "20 integral cases truthful; final-price witness: {witness}"
    ))
}

fn msr_equivalence() -> Outcome {
    let mut out = Vec::new();
    for rule in [MsrRule::Lmsr, MsrRule::Quadratic] {
        let rep = msr_equivalence_check(rule, 1.0f64, 3, 100, 5).map_err(|e| e.to_string())?;
        ensure(
            rep.max_x_discrepancy <= 1e-8 && rep.max_charge_discrepancy <= 1e-8,
            || format!("{rep:?}"),
        )?;
        out.push(format!(
            "{rule:?} dx {:.1e} dcharge {:.1e}",
            rep.max_x_discrepancy, rep.max_charge_discrepancy
        ));
    }
    Ok(format!("100 orders each; {}", out.join(", ")))
}

/// `u(s) = cᵀs`: increasing and concave, but its gradient never moves.
struct Linear {
    c: Vec<f64>,
}

impl Utility<f64> for Linear {
    fn n_outcomes(&self) -> usize {
        self.c.len()
    }

    fn value(&self, s: &[f64]) -> Result<f64> {
        Ok(self.c.iter().zip(s).map(|(a, b)| a * b).sum())
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

fn properness() -> Outcome {
    let mut worst = 0.0f64;
    for kind in [
        UtilityKind::Lmsr,
        UtilityKind::LogScpm,
        UtilityKind::ExponentialScpm,
        UtilityKind::QuadScpm,
        UtilityKind::QuadraticScore,
    ] {
        let rep = check_properness(&spec(kind, 1.0, 3), 200, 6).map_err(|e| e.to_string())?;
        ensure(
            rep.proper && rep.strictly_proper && rep.max_gradient_residual <= 1e-6,
            || format!("{kind}: {rep:?}"),
        )?;
        worst = worst.max(rep.max_gradient_residual);
    }
    let min =
        check_properness(&spec(UtilityKind::MinScpm, 1.0, 3), 200, 6).map_err(|e| e.to_string())?;
    ensure(min.proper && !min.strictly_proper, || {
        format!("MinSCPM: {min:?}")
    })?;
    let lin = check_properness(
        &Linear {
            c: vec![0.2, 0.3, 0.5],
        },
        200,
        6,
    )
    .map_err(|e| e.to_string())?;
    ensure(!lin.proper, || format!("linear utility: {lin:?}"))?;
    Ok(format!(
        "max residual {worst:.1e}; MinSCPM proper-not-strict; linear improper"
    ))
}

fn risk_measure_criterion() -> Outcome {
    let monotone = [
        UtilityKind::Lmsr,
        UtilityKind::LogScpm,
        UtilityKind::MinScpm,
        UtilityKind::ExponentialScpm,
        UtilityKind::QuadScpm,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for kind in monotone {
        let u = spec(kind, 1.0, 3);
        let rho = |z: &[f64]| {
            risk_measure(&u, z)
                .map(|r| r.rho)
                .map_err(|e| e.to_string())
        };
        for _ in 0..500 {
            let z1 = random_vec(&mut rng, 3, -3.0, 3.0);
            let z2: Vec<f64> = z1.iter().map(|x| x + rng.gen_range(0.0..2.0)).collect();
            let w = rng.gen_range(0.0..1.0);
            let c = rng.gen_range(-2.0..2.0);
            let mid: Vec<f64> = z1
                .iter()
                .zip(&z2)
                .map(|(a, b)| w * a + (1.0 - w) * b)
                .collect();
            let shifted: Vec<f64> = z1.iter().map(|x| x + c).collect();
            let (r1, r2) = (rho(&z1)?, rho(&z2)?);
            let convexity = rho(&mid)? - (w * r1 + (1.0 - w) * r2);
            let monotonicity = r2 - r1;
            let translation = (rho(&shifted)? - (r1 - c)).abs();
            worst = worst.max(convexity).max(monotonicity).max(translation);
        }
    }
    ensure(worst <= 1e-9, || format!("axiom violation {worst:.3e}"))?;

    let mut worst_gap = 0.0f64;
    for kind in [
        UtilityKind::MinScpm,
        UtilityKind::Lmsr,
        UtilityKind::ExponentialScpm,
        UtilityKind::QuadScpm,
    ] {
        for (n, resolution) in [(2, 2000), (3, 400)] {
            let u = spec(kind, 1.0, n);
            for _ in 0..3 {
                let z = random_vec(&mut rng, n, -2.0, 2.0);
                let eval = risk_dual_check(&u, &z, resolution, 0).map_err(|e| e.to_string())?;
                let gap = eval.dual.expect("dual evaluated").gap;
                ensure(gap <= 1e-4, || {
                    format!("{kind} N={n} z={z:?}: gap {gap:.3e}")
                })?;
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    Ok(format!(
        "axioms within {worst:.1e}; dual gap <= {worst_gap:.1e}"
    ))
}

fn oracle_cross_checks() -> Outcome {
    let start = Instant::now();
    let summary = run_verification(&VerifyOptions::default()).map_err(|e| e.to_string())?;
    let failures: Vec<_> = summary.failures().take(3).collect();
    ensure(failures.is_empty(), || format!("{failures:?}"))?;
    within_budget(start.elapsed(), 60.0)?;
    let parts: Vec<String> = [VerifyScope::Cost, VerifyScope::Charge, VerifyScope::Fill]
        .into_iter()
        .map(|s| {
            let (total, _, worst) = summary.scope_stats(s);
            format!("{s} {total} checks worst {worst:.1e}")
        })
        .collect();
    Ok(format!(
        "{} in {:.1}s",
        parts.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn loss_bound_in_simulation() -> Outcome {
    let mut worst_margin = f64::INFINITY;
    for kind in UtilityKind::ALL
        .into_iter()
        .filter(|&k| k != UtilityKind::LogScpm)
    {
        let u = spec(kind, 1.0, 3);
        let bound = worst_case_loss(&u).total;
        for seed in 0..100 {
            let out = run_simulation(MarketConfig64::new(u.clone()), &random_orders(3, 50, seed))
                .map_err(|e| e.to_string())?;
            let worst = out.summary.worst_profit();
            ensure(worst >= -bound - 1e-6, || {
                format!("{kind} seed {seed}: P&L {worst} bound {bound}")
            })?;
            worst_margin = worst_margin.min(worst + bound);
        }
    }
    Ok(format!("500 sequences, tightest margin {worst_margin:.3e}"))
}

fn convergence() -> Outcome {
    let mut market = Market64::new(MarketConfig64::new(spec(UtilityKind::Lmsr, 1.0, 2)))
        .map_err(|e| e.to_string())?;
    let agent = AgentSpec {
        belief: vec![0.7, 0.3],
        rounds: 100,
        trade_size_cap: 1.0,
    };
    let rep = run_convergence(&mut market, &agent).map_err(|e| e.to_string())?;
    ensure(rep.distance <= 1e-3 && rep.sweeps <= 100, || {
        format!("{rep:?}")
    })?;
    Ok(format!(
        "distance {:.1e} after {} sweeps",
        rep.distance, rep.sweeps
    ))
}

fn orders_csv(orders: &[Order64]) -> String {
    let mut text = String::from("trader_id,pi,limit,bundle\n");
    for o in orders {
        let bundle: Vec<String> = o.bundle.iter().map(|a| a.to_string()).collect();
        let limit = if o.limit.is_finite() {
            o.limit.to_string()
        } else {
            "inf".into()
        };
        text.push_str(&format!(
            "{},{},{},{}\n",
            o.trader_id,
            o.pi,
            limit,
            bundle.join(";")
        ));
    }
    text
}

fn determinism() -> Outcome {
    let config = MarketConfig64::new(
        make_utility(UtilityKind::QuadScpm, 1.5, Some(vec![0.2, 0.3, 0.5]), 3).unwrap(),
    );
    let csv = orders_csv(&random_orders(3, 200, 11));
    let run = || -> std::result::Result<String, String> {
        let orders = read_orders(csv.as_bytes(), 3).map_err(|e| e.to_string())?;
        Ok(run_simulation(config.clone(), &orders)
            .map_err(|e| e.to_string())?
            .trace)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "traces differ".into())?;
    Ok(format!("{} trace bytes identical across runs", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("worst-case loss column", loss_column),
        ("LMSR closed-form agreement", lmsr_closed_form),
        (
            "prices on simplex and translation invariance",
            simplex_and_translation,
        ),
        ("truthfulness of integral charging", truthfulness),
        ("scoring-rule equivalence", msr_equivalence),
        ("properness", properness),
        ("risk-measure axioms and duality", risk_measure_criterion),
        ("oracle cross-checks", oracle_cross_checks),
        ("loss bound in simulation", loss_bound_in_simulation),
        ("belief convergence", convergence),
        ("trace determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
