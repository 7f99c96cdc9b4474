//! Order-file ingestion, trace output, simulations and the belief-convergence
//! agent used by the command-line harness.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::check_properness;
use crate::error::{Result, ScpmError};
use crate::market::{FillResult, Market, MarketConfig, Order, SettlementReport};
use crate::scalar::{max_abs_diff, sum};

const ORDER_HEADER: [&str; 4] = ["trader_id", "pi", "limit", "bundle"];

fn parse_limit(field: &str) -> std::result::Result<f64, String> {
    match field.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| format!("bad limit {field:?}: {e}")),
    }
}

fn parse_bundle(field: &str) -> std::result::Result<Vec<f64>, String> {
    field
        .split(';')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad bundle entry {x:?}: {e}"))
        })
        .collect()
}

pub fn parse_bundle_arg(field: &str) -> Result<Vec<f64>> {
    parse_bundle(field).map_err(ScpmError::InvalidParameter)
}

/// Reads an order stream: a CSV file with header `trader_id,pi,limit,bundle`,
/// bundles as semicolon-separated reals and `inf` for an uncapped limit.
pub fn read_orders<R: Read>(reader: R, n_outcomes: usize) -> Result<Vec<Order<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| ScpmError::OrderFile {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ORDER_HEADER {
        return Err(ScpmError::OrderFile {
            line: 1,
            message: format!("expected header {}", ORDER_HEADER.join(",")),
        });
    }
    let mut orders = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| ScpmError::OrderFile {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |message: String| ScpmError::OrderFile { line, message };
        let pi = record[1]
            .parse::<f64>()
            .map_err(|e| fail(format!("bad pi {:?}: {e}", &record[1])))?;
        let limit = parse_limit(&record[2]).map_err(fail)?;
        let bundle = parse_bundle(&record[3]).map_err(fail)?;
        let order = Order::new(&record[0], pi, limit, bundle);
        order
            .validate(n_outcomes)
            .map_err(|e| fail(e.to_string()))?;
        orders.push(order);
    }
    Ok(orders)
}

#[derive(Serialize)]
#[serde(untagged)]
enum Limit {
    Finite(f64),
    Infinite(&'static str),
}

#[derive(Serialize)]
struct TraceOrder<'a> {
    trader_id: &'a str,
    pi: f64,
    limit: Limit,
    bundle: &'a [f64],
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    order: TraceOrder<'a>,
    x_bar: f64,
    charge: f64,
    prices_before: &'a [f64],
    prices_after: &'a [f64],
    collected_after: f64,
}

/// One JSON line describing a committed fill.
pub fn trace_line(fill: &FillResult<f64>, collected_after: f64) -> String {
    let record = TraceRecord {
        order: TraceOrder {
            trader_id: &fill.order.trader_id,
            pi: fill.order.pi,
            limit: if fill.order.limit.is_finite() {
                Limit::Finite(fill.order.limit)
            } else {
                Limit::Infinite("inf")
            },
            bundle: &fill.order.bundle,
        },
        x_bar: fill.x_bar,
        charge: fill.charge,
        prices_before: &fill.prices_before,
        prices_after: &fill.prices_after,
        collected_after,
    };
    serde_json::to_string(&record).expect("trace record serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub fills: usize,
    pub q: Vec<f64>,
    pub final_prices: Vec<f64>,
    pub collected: f64,
    pub settlements: Vec<SettlementReport<f64>>,
}

impl SimulationSummary {
    pub fn worst_profit(&self) -> f64 {
        self.settlements
            .iter()
            .map(|s| s.organizer_profit)
            .fold(f64::INFINITY, f64::min)
    }

    /// `None` when the utility has no finite loss bound.
    pub fn bound_respected(&self) -> Option<bool> {
        self.settlements
            .iter()
            .map(|s| s.bound_check)
            .collect::<Option<Vec<bool>>>()
            .map(|v| v.into_iter().all(|ok| ok))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    /// JSONL trace, one line per order, each terminated by `\n`.
    pub trace: String,
    pub summary: SimulationSummary,
}

/// Processes `orders` in sequence through fill and apply.
pub fn run_simulation(
    config: MarketConfig<f64>,
    orders: &[Order<f64>],
) -> Result<SimulationOutcome> {
    let mut market = Market::new(config)?;
    let mut trace = String::new();
    for order in orders {
        let fill = market.submit(order)?.clone();
        trace.push_str(&trace_line(&fill, market.collected()));
        trace.push('\n');
    }
    let settlements = (0..market.n_outcomes())
        .map(|i| market.settle(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutcome {
        trace,
        summary: SimulationSummary {
            fills: market.journal().len(),
            q: market.q().to_vec(),
            final_prices: market.prices()?,
            collected: market.collected(),
            settlements,
        },
    })
}

/// Random order stream fully determined by `seed`: limit prices in
/// `(0.05, 0.95)`, 0/1 bundles, about a third of the orders uncapped.
pub fn random_orders(n_outcomes: usize, count: usize, seed: u64) -> Vec<Order<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let mut bundle = vec![0.0; n_outcomes];
            if rng.gen_bool(0.5) {
                bundle[rng.gen_range(0..n_outcomes)] = 1.0;
            } else {
                while bundle.iter().all(|&a| a == 0.0) {
                    for a in bundle.iter_mut() {
                        *a = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
                    }
                }
            }
            let pi = rng.gen_range(0.05..0.95);
            let limit = if rng.gen_bool(0.3) {
                f64::INFINITY
            } else {
                rng.gen_range(0.1..5.0)
            };
            Order::new(format!("r{k}"), pi, limit, bundle)
        })
        .collect()
}

/// A myopic trader who believes outcome probabilities `belief`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub belief: Vec<f64>,
    pub rounds: usize,
    pub trade_size_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub sweeps: usize,
    pub trades: usize,
    pub final_prices: Vec<f64>,
    /// `‖p_final - belief‖∞`
    pub distance: f64,
    pub warning: Option<String>,
}

/// Each sweep buys every outcome priced below the agent's belief, with limit
/// price equal to the belief and quantity capped at `trade_size_cap`. Stops
/// after `rounds` sweeps or the first sweep with no accepted quantity.
pub fn run_convergence(market: &mut Market<f64>, agent: &AgentSpec) -> Result<ConvergenceReport> {
    let n = market.n_outcomes();
    if agent.belief.len() != n {
        return Err(ScpmError::DimensionMismatch {
            expected: n,
            got: agent.belief.len(),
        });
    }
    if agent.belief.iter().any(|&r| !(r >= 0.0)) || (sum(&agent.belief) - 1.0).abs() > 1e-10 {
        return Err(ScpmError::NotOnSimplex("agent belief".into()));
    }
    if !(agent.trade_size_cap > 0.0) {
        return Err(ScpmError::InvalidParameter(
            "trade size cap must be positive".into(),
        ));
    }
    let proper = check_properness(market.utility(), 20, 0)?;
    let warning = (!proper.strictly_proper).then(|| {
        format!(
            "{} is not strictly proper; prices need not converge to the belief",
            market.utility().kind()
        )
    });
    let mut sweeps = 0;
    let mut trades = 0;
    for _ in 0..agent.rounds {
        sweeps += 1;
        let mut traded = false;
        for i in 0..n {
            let p = market.prices()?;
            if agent.belief[i] <= p[i] {
                continue;
            }
            let mut bundle = vec![0.0; n];
            bundle[i] = 1.0;
            let order = Order::new("agent", agent.belief[i], agent.trade_size_cap, bundle);
            let fill = market.submit(&order)?;
            if fill.x_bar > 0.0 {
                traded = true;
                trades += 1;
            }
        }
        if !traded {
            break;
        }
    }
    let final_prices = market.prices()?;
    Ok(ConvergenceReport {
        sweeps,
        trades,
        distance: max_abs_diff(&final_prices, &agent.belief),
        final_prices,
        warning,
    })
}
