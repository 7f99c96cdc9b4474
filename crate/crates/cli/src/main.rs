use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use scpm::analysis::table1;
use scpm::sim::{self, AgentSpec};
use scpm::verify::{run_verification, VerifyOptions, VerifyScope};
use scpm::{
    make_utility, Market64, MarketConfig64, MarketConfigFile, Order64, Utility, UtilityKind,
};

#[derive(Parser)]
#[command(name = "scpm", version, about = "Convex pari-mutuel market maker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the current price of a bundle and the full price vector.
    Quote(QuoteArgs),
    /// Submit the orders in a CSV file and print each fill.
    Trade(TradeArgs),
    /// Run an order stream, write the JSONL trace and print settlement.
    Simulate(SimulateArgs),
    /// Let a truthful agent trade toward its belief.
    Converge(ConvergeArgs),
    /// Summarize every catalog mechanism.
    Table1(Table1Args),
    /// Cross-check the engine against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct QuoteArgs {
    #[arg(long)]
    config: PathBuf,
    /// Semicolon-separated bundle, e.g. `1;0`.
    #[arg(long)]
    bundle: String,
    /// Orders to apply before quoting.
    #[arg(long)]
    orders: Option<PathBuf>,
}

#[derive(Args)]
struct TradeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    orders: PathBuf,
    /// Also write the JSONL trace here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Order CSV. Without it, `--count` random orders are drawn from `--seed`.
    #[arg(long)]
    orders: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    count: usize,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Market config. Defaults to an LMSR market with liquidity `--b`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Semicolon-separated belief, e.g. `0.7;0.3`.
    #[arg(long)]
    belief: String,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 1.0)]
    cap: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Semicolon-separated prior weights for the mechanisms that take them.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// cost, charge, fill or all.
    #[arg(default_value = "all")]
    scope: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

/// Bad input from the user: exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A verification run found discrepancies: exits with status 1.
#[derive(Debug)]
struct VerificationFailed(usize);

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} verification check(s) failed", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn usage(message: impl fmt::Display) -> anyhow::Error {
    UsageError(message.to_string()).into()
}

fn load_config(path: &Path) -> Result<MarketConfig64> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: MarketConfigFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    MarketConfig64::from_file(&file)
        .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn load_orders(path: &Path, n: usize) -> Result<Vec<Order64>> {
    let file = fs::File::open(path)
        .map_err(|e| usage(format!("cannot read orders {}: {e}", path.display())))?;
    sim::read_orders(file, n).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_vector(what: &str, text: &str) -> Result<Vec<f64>> {
    sim::parse_bundle_arg(text).map_err(|e| usage(format!("invalid {what}: {e}")))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_trace(path: &Path, trace: &str) -> Result<()> {
    fs::write(path, trace).with_context(|| format!("cannot write {}", path.display()))
}

fn quote(args: QuoteArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let n = config.utility.n_outcomes();
    let bundle = parse_vector("bundle", &args.bundle)?;
    let mut market = Market64::new(config).map_err(usage)?;
    if let Some(path) = &args.orders {
        for order in load_orders(path, n)? {
            market.submit(&order)?;
        }
    }
    let price = market.quote(&bundle).map_err(usage)?;
    println!("{price:.6}");
    println!("prices: {}", fmt_vec(&market.prices()?));
    Ok(())
}

fn trade(args: TradeArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let orders = load_orders(&args.orders, config.utility.n_outcomes())?;
    let mut market = Market64::new(config).map_err(usage)?;
    let mut trace = String::new();
    for order in &orders {
        let fill = market.submit(order)?.clone();
        trace.push_str(&sim::trace_line(&fill, market.collected()));
        trace.push('\n');
        let bundle_price: f64 = fill
            .prices_after
            .iter()
            .zip(&fill.order.bundle)
            .map(|(p, a)| p * a)
            .sum();
        println!(
            "{} x_bar={:.6} charge={:.6} bundle_price={:.6}",
            fill.order.trader_id, fill.x_bar, fill.charge, bundle_price
        );
    }
    println!("q: {}", fmt_vec(market.q()));
    println!("prices: {}", fmt_vec(&market.prices()?));
    println!("collected: {:.6}", market.collected());
    if let Some(out) = &args.out {
        write_trace(out, &trace)?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let n = config.utility.n_outcomes();
    let orders = match &args.orders {
        Some(path) => load_orders(path, n)?,
        None => sim::random_orders(n, args.count, args.seed),
    };
    let outcome = sim::run_simulation(config, &orders)?;
    if let Some(out) = &args.out {
        write_trace(out, &outcome.trace)?;
    }
    let s = &outcome.summary;
    println!("orders: {}", orders.len());
    println!("collected: {:.6}", s.collected);
    println!("q: {}", fmt_vec(&s.q));
    println!("final prices: {}", fmt_vec(&s.final_prices));
    for r in &s.settlements {
        println!(
            "outcome {}: payout {:.6} organizer profit {:.6}",
            r.outcome, r.payout, r.organizer_profit
        );
    }
    match (
        s.settlements.first().and_then(|r| r.loss_bound),
        s.bound_respected(),
    ) {
        (Some(bound), Some(ok)) => println!(
            "loss bound: {bound:.6} ({})",
            if ok { "respected" } else { "VIOLATED" }
        ),
        _ => println!("loss bound: unbounded"),
    }
    Ok(())
}

fn converge(args: ConvergeArgs) -> Result<()> {
    let belief = parse_vector("belief", &args.belief)?;
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => MarketConfig64::new(
            make_utility(UtilityKind::Lmsr, args.b, None, belief.len()).map_err(usage)?,
        ),
    };
    let mut market = Market64::new(config).map_err(usage)?;
    let agent = AgentSpec {
        belief,
        rounds: args.rounds,
        trade_size_cap: args.cap,
    };
    let report = sim::run_convergence(&mut market, &agent).map_err(usage)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    println!("sweeps: {}", report.sweeps);
    println!("trades: {}", report.trades);
    println!("final prices: {}", fmt_vec(&report.final_prices));
    println!("distance: {:.6e}", report.distance);
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "unbounded".to_string(), |x| format!("{x:.6}"))
}

fn table(args: Table1Args) -> Result<()> {
    let theta = args
        .theta
        .as_deref()
        .map(|t| parse_vector("theta", t))
        .transpose()?;
    let rows = table1(args.b, args.n, theta, args.seed).map_err(usage)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    println!(
        "{:<16} {:>12} {:>12} {:<16} {:>10} {:<6} {:<16} {:>10}",
        "mechanism", "loss", "loss(num)", "properness", "residual", "risk", "penalty", "deviation"
    );
    for r in &rows {
        let (family, dev) = match &r.penalty {
            Some(p) => (p.family.to_string(), format!("{:.2e}", p.max_deviation)),
            None => ("-".to_string(), "-".to_string()),
        };
        println!(
            "{:<16} {:>12} {:>12} {:<16} {:>10.2e} {:<6} {:<16} {:>10}",
            r.kind.to_string(),
            opt(r.loss_analytic),
            opt(r.loss_numeric),
            r.properness.to_string(),
            r.max_gradient_residual,
            if r.risk_measure { "yes" } else { "no" },
            family,
            dev
        );
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let scope: VerifyScope = args.scope.parse().map_err(usage)?;
    let summary = run_verification(&VerifyOptions {
        scope,
        tolerance_scale: args.tolerance_scale,
        seed: args.seed,
        ..VerifyOptions::default()
    })?;
    for s in [VerifyScope::Cost, VerifyScope::Charge, VerifyScope::Fill] {
        let (total, failed, worst) = summary.scope_stats(s);
        if total > 0 {
            println!("{s}: {total} checks, {failed} failed, worst discrepancy {worst:.3e}");
        }
    }
    let failures: Vec<_> = summary.failures().collect();
    for f in &failures {
        println!(
            "FAIL {} {} {}: discrepancy {:.3e} > tolerance {:.3e}",
            f.scope, f.utility, f.input, f.discrepancy, f.tolerance
        );
    }
    if failures.is_empty() {
        println!("PASS");
        Ok(())
    } else {
        Err(VerificationFailed(failures.len()).into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Quote(a) => quote(a),
        Command::Trade(a) => trade(a),
        Command::Simulate(a) => simulate(a),
        Command::Converge(a) => converge(a),
        Command::Table1(a) => table(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<VerificationFailed>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
