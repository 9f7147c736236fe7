//! `equi-auction`: command-line front end for equilibrium bids, surplus
//! equity metrics, equity-optimal pricing search, the surplus-equitable
//! mechanism, and the Monte Carlo oracle.
//!
//! Every command is a pure function of (config, seed): re-running writes a
//! byte-identical file, and each output embeds the resolved configuration.

mod config;

use clap::{Args, Parser, Subcommand};
use config::Config;
use equi_auction_core::equilibrium::BidCurve;
use equi_auction_core::{equity, mechanism, search, simulate};
use serde_json::{json, Value};

const CSV_VERSION: &str = "equi-auction csv v1";

#[derive(Parser)]
#[command(name = "equi-auction", version, about = "k-unit mixed-price auction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the equilibrium bid function as CSV columns s, bid, slope.
    BidCurve(RunArgs),
    /// Winners' empirical variance plus MEU verdict and theory bounds (JSON).
    Wev(RunArgs),
    /// WEV landscape over (c, δ) as CSV columns c, delta, wev, meu_holds, max_slope.
    Sweep(RunArgs),
    /// WEV-minimizing δ per c: CSV columns c, delta_star, lb (JSON summary with --set output.format=json).
    DeltaStar(RunArgs),
    /// Surplus-equitable mechanism outcome for one signal profile (JSON).
    Equitable(RunArgs),
    /// Monte Carlo estimates with standard errors (JSON).
    Simulate(SimulateArgs),
    /// Private-value counterexample: WEV under uniform and pay-as-bid pricing (JSON).
    Counterexample(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<String>,
    /// Dotted-key overrides, e.g. --set market.c=0.8 --set delta=1.0.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; overrides config.output.path. Stdout when absent.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of Monte Carlo draws.
    #[arg(long)]
    draws: Option<u64>,
    /// RNG seed; identical seeds reproduce estimates bit-for-bit.
    #[arg(long)]
    seed: Option<u64>,
    /// Price-discrimination weight δ ∈ [0, 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Quantity to estimate.
    #[arg(long, value_parser = ["wev", "revenue", "regret", "variances", "gini"])]
    metric: Option<String>,
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BidCurve(a) => run(a, cmd_bid_curve),
        Command::Wev(a) => run(a, cmd_wev),
        Command::Sweep(a) => run(a, cmd_sweep),
        Command::DeltaStar(a) => run(a, cmd_delta_star),
        Command::Equitable(a) => run(a, cmd_equitable),
        Command::Simulate(a) => run_simulate(a),
        Command::Counterexample(a) => run(a, cmd_counterexample),
    };
    if let Err(msg) = result {
        let err = json!({ "error": msg });
        eprintln!("{err}");
        std::process::exit(1);
    }
}

fn init_threads() {
    if let Ok(raw) = std::env::var("EQUI_AUCTION_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(args: &RunArgs, cmd: fn(&Config) -> Result<String, String>) -> Result<(), String> {
    let cfg = Config::load(args.config.as_deref(), &args.set)?;
    emit(args, &cfg, cmd(&cfg)?)
}

fn run_simulate(args: &SimulateArgs) -> Result<(), String> {
    let mut cfg = Config::load(args.run.config.as_deref(), &args.run.set)?;
    // Dedicated flags take precedence over config fields.
    if let Some(d) = args.draws {
        cfg.draws = Some(d);
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(d) = args.delta {
        cfg.delta = Some(d);
    }
    if let Some(m) = &args.metric {
        cfg.metric = Some(m.clone());
    }
    emit(&args.run, &cfg, cmd_simulate(&cfg)?)
}

fn emit(args: &RunArgs, cfg: &Config, content: String) -> Result<(), String> {
    let path = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.path.clone()));
    match path {
        Some(p) => std::fs::write(&p, content).map_err(|e| format!("cannot write {p}: {e}")),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn config_comment(cfg: &Config) -> String {
    format!("# {CSV_VERSION}; config: {}", cfg.to_value())
}

fn json_output(cfg: &Config, mut body: serde_json::Map<String, Value>) -> String {
    body.insert("config".to_string(), cfg.to_value());
    let mut text =
        serde_json::to_string_pretty(&Value::Object(body)).expect("serializable output");
    text.push('\n');
    text
}

fn cmd_bid_curve(cfg: &Config) -> Result<String, String> {
    let market = cfg.market()?;
    let delta = cfg.delta()?;
    let curve = BidCurve::build(&market, delta).map_err(|e| e.to_string())?;
    let points = cfg.grid_points.unwrap_or(257).max(2);
    let hi = market.dist().support_hi();
    let mut out = String::new();
    out.push_str(&config_comment(cfg));
    out.push_str("\ns,bid,slope\n");
    for i in 0..points {
        let s = hi * i as f64 / (points - 1) as f64;
        out.push_str(&format!(
            "{s:.12e},{:.12e},{:.12e}\n",
            curve.bid(s),
            curve.slope(s)
        ));
    }
    Ok(out)
}

fn bounds_value(b: &equity::TheoryBounds) -> Value {
    json!({
        "lb_logconcave": b.lb_logconcave,
        "dominating_range_hi": b.dominating_range_hi,
        "lb_distribution": b.lb_distribution,
    })
}

fn cmd_wev(cfg: &Config) -> Result<String, String> {
    let market = cfg.market()?;
    let delta = cfg.delta()?;
    let report = equity::equity_report(&market, delta).map_err(|e| e.to_string())?;
    let margin = report.meu_margin.is_finite().then_some(report.meu_margin);
    let mut body = serde_json::Map::new();
    body.insert("wev".into(), json!(report.wev));
    body.insert(
        "meu".into(),
        json!({
            "holds": report.meu_holds,
            "margin": margin,
            "max_slope": report.max_slope,
        }),
    );
    body.insert("bounds".into(), bounds_value(&equity::theory_bounds(&market)));
    Ok(json_output(cfg, body))
}

fn cmd_sweep(cfg: &Config) -> Result<String, String> {
    let template = cfg.market()?;
    let c_grid = cfg.c_grid();
    let delta_grid = cfg.delta_grid();
    let sweep =
        search::landscape_sweep(&template, &c_grid, &delta_grid).map_err(|e| e.to_string())?;
    let mut out = String::new();
    out.push_str(&config_comment(cfg));
    out.push_str("\nc,delta,wev,meu_holds,max_slope\n");
    for (i, &c) in sweep.c_grid.iter().enumerate() {
        for (j, &d) in sweep.delta_grid.iter().enumerate() {
            out.push_str(&format!(
                "{c:.6},{d:.6},{:.12e},{},{:.12e}\n",
                sweep.wev_matrix[i][j], sweep.meu_matrix[i][j], sweep.max_slope_matrix[i][j]
            ));
        }
    }
    Ok(out)
}

fn cmd_delta_star(cfg: &Config) -> Result<String, String> {
    let template = cfg.market()?;
    let c_grid = cfg.c_grid();
    let tol = cfg.tol.unwrap_or(1e-3);
    let as_json = cfg
        .output
        .as_ref()
        .and_then(|o| o.format.as_deref())
        .map(|f| f.eq_ignore_ascii_case("json"))
        .unwrap_or(false);

    let mut rows = Vec::new();
    for &c in &c_grid {
        let market = template.with_c(c).map_err(|e| e.to_string())?;
        let star = search::delta_star(&market, tol).map_err(|e| e.to_string())?;
        let frontier = search::meu_frontier(&market).map_err(|e| e.to_string())?;
        let bounds = equity::theory_bounds(&market);
        rows.push((c, star, frontier, bounds));
    }

    if as_json {
        let summary: Vec<Value> = rows
            .iter()
            .map(|(c, star, frontier, bounds)| {
                json!({
                    "c": c,
                    "delta_star": star.delta,
                    "wev_min": star.wev,
                    "frontier": frontier,
                    "bounds": bounds_value(bounds),
                })
            })
            .collect();
        let mut body = serde_json::Map::new();
        body.insert("rows".into(), Value::Array(summary));
        return Ok(json_output(cfg, body));
    }

    let mut out = String::new();
    out.push_str(&config_comment(cfg));
    out.push_str("\nc,delta_star,lb\n");
    for (c, star, _, bounds) in rows {
        let lb = bounds.lb_distribution.unwrap_or(bounds.lb_logconcave);
        out.push_str(&format!("{c:.6},{:.6},{lb:.6}\n", star.delta));
    }
    Ok(out)
}

fn cmd_equitable(cfg: &Config) -> Result<String, String> {
    let market = cfg.market()?;
    let signals = cfg.signal_profile()?;
    let res = mechanism::equitable_outcome(&market, &signals).map_err(|e| e.to_string())?;
    let mut body = serde_json::Map::new();
    body.insert("winners".into(), json!(res.winners));
    body.insert("payments".into(), json!(res.payments));
    body.insert("utilities".into(), json!(res.utilities));
    body.insert("budget".into(), json!(res.budget));
    Ok(json_output(cfg, body))
}

fn estimate_value(metric: &str, e: &simulate::McEstimate) -> Value {
    json!({
        "metric": metric,
        "mean": e.mean,
        "std_error": e.std_error,
        "draws": e.draws,
        "seed": e.seed,
    })
}

fn cmd_simulate(cfg: &Config) -> Result<String, String> {
    let market = cfg.market()?;
    let delta = cfg.delta.unwrap_or(0.0);
    let draws = cfg.draws();
    let seed = cfg.seed();
    let curve = BidCurve::build(&market, delta).map_err(|e| e.to_string())?;
    let metric = cfg.metric.as_deref().unwrap_or("wev");
    let mut body = serde_json::Map::new();
    match metric {
        "wev" => {
            let e = simulate::estimate_wev(&curve, draws, seed).map_err(|e| e.to_string())?;
            body.insert("estimate".into(), estimate_value(metric, &e));
        }
        "revenue" => {
            let e = simulate::estimate_revenue(&curve, draws, seed).map_err(|e| e.to_string())?;
            body.insert("estimate".into(), estimate_value(metric, &e));
        }
        "gini" => {
            let e =
                simulate::estimate_gini_winners(&curve, draws, seed).map_err(|e| e.to_string())?;
            body.insert("estimate".into(), estimate_value(metric, &e));
        }
        "regret" => {
            let dist = market.dist();
            let mut pairs = Vec::new();
            for i in 1..=4 {
                let s = dist.quantile(i as f64 / 5.0).map_err(|e| e.to_string())?;
                for j in 1..=4 {
                    let z = dist
                        .quantile(0.05 + 0.9 * (j as f64 - 1.0) / 3.0)
                        .map_err(|e| e.to_string())?;
                    pairs.push((s, z));
                }
            }
            let rep =
                simulate::regret_audit(&curve, &pairs, draws, seed).map_err(|e| e.to_string())?;
            let points: Vec<Value> = rep
                .points
                .iter()
                .map(|p| json!({"s": p.s, "z": p.z, "mean": p.mean, "std_error": p.std_error}))
                .collect();
            body.insert(
                "regret".into(),
                json!({"max_regret": rep.max_regret, "points": points, "draws": draws, "seed": seed}),
            );
        }
        "variances" => {
            let s = simulate::estimate_variance_suite(&curve, draws, seed)
                .map_err(|e| e.to_string())?;
            let pack = |e: &simulate::EstimateWithSe| json!({"value": e.value, "std_error": e.std_error});
            body.insert(
                "variances".into(),
                json!({
                    "var": pack(&s.var),
                    "winners_var": pack(&s.winners_var),
                    "ev": pack(&s.ev),
                    "wev": pack(&s.wev),
                    "ev_identity_residual": pack(&s.ev_identity_residual),
                    "var_identity_residual": pack(&s.var_identity_residual),
                    "winner_mean_residual": pack(&s.winner_mean_residual),
                    "draws": s.draws,
                    "seed": s.seed,
                }),
            );
        }
        other => {
            return Err(format!(
                "unknown metric `{other}` (expected wev, revenue, regret, variances, or gini)"
            ))
        }
    }
    Ok(json_output(cfg, body))
}

fn cmd_counterexample(cfg: &Config) -> Result<String, String> {
    let market = if cfg.market.dist.kind == "counterexample" {
        cfg.market()?
    } else {
        // Default to the near-two-point construction sized to the market.
        let n = cfg.market.n.max(5);
        let dist = equi_auction_core::SignalDistribution::counterexample(0.1 / n as f64, 1e-3)
            .map_err(|e| e.to_string())?;
        equi_auction_core::Market::new(n, n - 1, 0.0, dist).map_err(|e| e.to_string())?
    };
    let n = market.n() as f64;
    let wev_uniform = equity::wev(&market, 0.0).map_err(|e| e.to_string())?;
    let wev_payasbid = equity::wev(&market, 1.0).map_err(|e| e.to_string())?;
    let mut body = serde_json::Map::new();
    body.insert("wev_uniform".into(), json!(wev_uniform));
    body.insert("wev_payasbid".into(), json!(wev_payasbid));
    body.insert(
        "bounds".into(),
        json!({
            "wev_uniform_upper": 0.005 / n,
            "wev_payasbid_lower": 0.01 / n,
        }),
    );
    Ok(json_output(cfg, body))
}
