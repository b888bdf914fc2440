//! Command-line entry point: instance generation, single runs, trace
//! verification, experiment sweeps and the local-smoothness checker.
//!
//! Exit codes: 0 success, 1 verification failure (a `VIOLATION` line is
//! printed per failed check), 2 usage or input error.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use packpred::adauction::{self, run_ad_auction};
use packpred::bench::{self, ExperimentConfig};
use packpred::engine::{
    run_online_packing, verify_dual, verify_feasibility, verify_lemma1, GrowthMethod, RunConfig,
};
use packpred::objective::{check_local_smoothness, EvalMode, SmoothnessParams, EXACT_LIMIT};
use packpred::offline;

#[derive(Parser)]
#[command(name = "packpred", version, about = "Online primal-dual packing and ad-auction allocation with predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded ad-auction instance (and optionally a prediction).
    Gen(GenArgs),
    /// Run the algorithm once on an instance file.
    Run(RunArgs),
    /// Replay a packing trace through the verifiers.
    Verify(VerifyArgs),
    /// Run the full (eta, epsilon) experiment sweep.
    Sweep(SweepArgs),
    /// Check (lambda, mu)-local smoothness of an oracle.
    Smoothcheck(SmoothcheckArgs),
}

#[derive(Args)]
struct ConfigOverrides {
    /// Optional key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    buyers: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    bidders_per_item: Option<usize>,
    #[arg(long)]
    budget_fraction: Option<f64>,
    #[arg(long)]
    seed_instance: Option<u64>,
    #[arg(long)]
    seed_pred: Option<u64>,
    #[arg(long)]
    seed_alg: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigOverrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match self.preset.as_deref() {
            None | Some("desk") => ExperimentConfig::desk(),
            Some("paper") => ExperimentConfig::paper(),
            Some(other) => bail!("unknown preset `{other}` (expected desk or paper)"),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let map = parse_kv(&text)?;
            apply_kv(&mut cfg, &map)?;
        }
        if let Some(v) = self.buyers {
            cfg.buyers = v;
        }
        if let Some(v) = self.items {
            cfg.items = v;
        }
        if let Some(v) = self.bidders_per_item {
            cfg.bidders_per_item = v;
        }
        if let Some(v) = self.budget_fraction {
            cfg.budget_fraction = v;
        }
        if let Some(v) = self.seed_instance {
            cfg.seed_instance = v;
        }
        if let Some(v) = self.seed_pred {
            cfg.seed_prediction = v;
        }
        if let Some(v) = self.seed_alg {
            cfg.seed_algorithm = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        Ok(cfg)
    }
}

fn parse_kv(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value", ln + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn apply_kv(cfg: &mut ExperimentConfig, map: &HashMap<String, String>) -> Result<()> {
    for (k, v) in map {
        match k.as_str() {
            "buyers" => cfg.buyers = v.parse()?,
            "items" => cfg.items = v.parse()?,
            "bidders_per_item" => cfg.bidders_per_item = v.parse()?,
            "mean_log" => cfg.mean_log = v.parse()?,
            "sd_log" => cfg.sd_log = v.parse()?,
            "lognormal_moments" => cfg.lognormal_moments = v.parse()?,
            "budget_fraction" => cfg.budget_fraction = v.parse()?,
            "seed_instance" => cfg.seed_instance = v.parse()?,
            "seed_pred" => cfg.seed_prediction = v.parse()?,
            "seed_alg" => cfg.seed_algorithm = v.parse()?,
            "out_dir" => cfg.out_dir = PathBuf::from(v),
            "etas" => {
                cfg.etas = v
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()?
            }
            "epsilons" => {
                cfg.epsilons = v
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()?
            }
            other => bail!("unknown config key `{other}`"),
        }
    }
    Ok(())
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Also write the LP-rounded base prediction, perturbed by --epsilon.
    #[arg(long)]
    with_prediction: bool,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Problem kind: adauction or packing.
    kind: String,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    prediction: Option<PathBuf>,
    /// Ignore any prediction entirely (i* = 0 on every item).
    #[arg(long)]
    no_prediction: bool,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Known fractional optimum; computed via the LP when omitted (adauction).
    #[arg(long)]
    opt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Per-step primal increment of the growth loop (packing).
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    /// Monte-Carlo samples for large oracles (packing); exact when omitted.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 3)]
    seed_alg: u64,
    /// Write the packing trace to this file.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SmoothcheckArgs {
    /// Packing instance file supplying the oracle.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Smoothcheck(args) => cmd_smoothcheck(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let cfg = args.overrides.build()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let instance = bench::generate_instance(&cfg, cfg.seed_instance)?;
    let inst_path = cfg.out_dir.join("instance.txt");
    bench::write_auction_instance(&instance, &inst_path)?;
    println!(
        "instance: {} buyers, {} items, R_max = {:.6} -> {}",
        instance.m,
        instance.n(),
        instance.r_max,
        inst_path.display()
    );
    if args.with_prediction {
        let (lp, var_map) = offline::build_auction_lp(&instance)?;
        let sol = offline::solve_lp(&lp)?;
        let base = offline::greedy_prediction_base(&instance, &sol.x, &var_map);
        let pred = offline::generate_prediction(&base, args.epsilon, cfg.seed_prediction, &instance);
        let pred_path = cfg.out_dir.join("prediction.txt");
        bench::write_auction_prediction(&pred, &pred_path)?;
        println!(
            "prediction: epsilon = {}, P(I) = {:.6} -> {}",
            args.epsilon,
            adauction::prediction_value(&instance, &pred),
            pred_path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    match args.kind.as_str() {
        "adauction" => run_auction(args),
        "packing" => run_packing(args),
        other => bail!("unknown problem kind `{other}` (expected adauction or packing)"),
    }
}

fn run_auction(args: RunArgs) -> Result<ExitCode> {
    let instance = bench::read_auction_instance(&args.instance)?;
    let pred = if args.no_prediction {
        None
    } else {
        match &args.prediction {
            Some(p) => Some(bench::read_auction_prediction(p, instance.n())?),
            None => None,
        }
    };
    let out = run_ad_auction(&instance, pred.as_deref(), args.eta)?;
    println!("revenue: {:.6}", out.revenue_capped);
    if let Some(pred) = &pred {
        let p_val = adauction::prediction_value(&instance, pred);
        if p_val > 0.0 {
            println!("consistency_ratio: {:.6}", out.revenue_capped / p_val);
        }
        match out.pred_infeasible_at {
            Some(e) => println!(
                "prediction_infeasible_at: {:.4}",
                e as f64 / instance.n() as f64
            ),
            None => println!("prediction_infeasible_at: none"),
        }
    }
    let opt = match args.opt {
        Some(v) => v,
        None => offline::solve_fractional_opt(&instance)?.value,
    };
    if opt > 0.0 {
        println!("opt_frac: {opt:.6}");
        println!("robustness: {:.6}", out.revenue_capped / opt);
    }

    let mut failed = false;
    for v in &out.check_violations {
        println!("VIOLATION {v}");
        failed = true;
    }
    let budgets = adauction::verify_budgets(&out.state, &instance);
    for v in &budgets.violations {
        println!("VIOLATION {v}");
        failed = true;
    }
    println!(
        "verifiers: {}",
        if failed { "FAILED" } else { "all passed" }
    );
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_packing(args: RunArgs) -> Result<ExitCode> {
    let (instance, _spec) = bench::read_packing_instance(&args.instance)?;
    let n = instance.n();
    let bits = match &args.prediction {
        Some(p) if !args.no_prediction => bench::read_packing_prediction(p, n)?,
        _ => vec![false; n],
    };
    let mode = match args.samples {
        Some(s) => EvalMode::Sampled {
            samples: s,
            seed: args.seed_alg,
        },
        None if n <= EXACT_LIMIT || instance.oracle.is_linear() => EvalMode::Exact,
        None => EvalMode::Sampled {
            samples: 100_000,
            seed: args.seed_alg,
        },
    };
    let mut cfg = RunConfig::new(
        args.eta,
        SmoothnessParams::new(args.lambda, args.mu)?,
        mode,
    );
    cfg.step_dy = args.step;
    if instance.oracle.is_linear() {
        cfg.method = GrowthMethod::ClosedForm;
    }
    let out = run_online_packing(&instance, &bits, &cfg)?;
    println!("objective: {:.6}", out.objective_x);
    println!("dual_objective: {:.6}", out.dual.objective());
    if let Some(opt) = args.opt {
        println!("robustness: {:.6}", out.objective_x / opt);
    }
    match out.pred_infeasible_at {
        Some(e) => println!("prediction_infeasible_at: {:.4}", e as f64 / n as f64),
        None => println!("prediction_infeasible_at: none"),
    }

    let mut failed = false;
    let feas = verify_feasibility(&out.x, &out.y, &instance.columns, &out.b_bar, instance.m);
    for v in &feas.violations {
        println!("VIOLATION {v}");
        failed = true;
    }
    let lem = verify_lemma1(&out.trace, instance.m, instance.d, args.lambda);
    for v in &lem.violations {
        println!("VIOLATION {v}");
        failed = true;
    }
    if n <= 12 {
        let dual = verify_dual(&out.dual, &instance.oracle, &out.b_bar)?;
        for v in &dual.violations {
            println!("VIOLATION {v}");
            failed = true;
        }
    }
    println!(
        "verifiers: {}",
        if failed { "FAILED" } else { "all passed" }
    );
    if let Some(path) = &args.trace_out {
        bench::write_trace(&out.trace, instance.m, instance.d, args.lambda, path)?;
        println!("trace -> {}", path.display());
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let stored = bench::read_trace(&args.trace)?;
    let report = verify_lemma1(&stored.trace, stored.m, stored.d, stored.lambda);
    for v in &report.violations {
        println!("VIOLATION {v}");
    }
    if report.passed() {
        println!(
            "trace ok: {} elements, {} snapshots checked",
            stored.trace.records.len(),
            report.snapshots_checked
        );
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let cfg = args.overrides.build()?;
    let result = bench::run_sweep(&cfg)?;
    let files = bench::emit_dat(&result, &cfg.out_dir)?;
    println!(
        "sweep: {} rows, R_max = {:.6}, OPT = {:.6}",
        result.rows.len(),
        result.r_max,
        result.opt_frac
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_smoothcheck(args: SmoothcheckArgs) -> Result<ExitCode> {
    let (instance, _spec) = bench::read_packing_instance(&args.instance)?;
    let params = SmoothnessParams::new(args.lambda, args.mu)?;
    let report = check_local_smoothness(&instance.oracle, params, args.trials, args.seed)?;
    println!(
        "smoothness ({}, {}): {} pairs checked, {} violations, max violation {:.3e}",
        args.lambda,
        args.mu,
        report.pairs_checked,
        report.violations.len(),
        report.max_violation
    );
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "VIOLATION local smoothness fails at ({}, {}) with margin {:.3e}",
            args.lambda, args.mu, report.max_violation
        );
        Ok(ExitCode::from(1))
    }
}
