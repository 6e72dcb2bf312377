//! Experiment harness: dataset generation, algorithm runs over independent
//! trials, Monte-Carlo verification suites, and bound evaluation.
//!
//! Exit codes: 0 success, 1 statistical or algorithmic failure, 2 usage or
//! validation error. Reports are JSON lines: one row per trial followed by
//! one aggregate row; all randomness derives from --seed, with trial i using
//! seed + i.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qkmeans::bounds;
use qkmeans::datagen::{
    self, compute_gamma, generate, DatasetHeader, GroundTruth, MixtureSpec, PRNG_NAME,
};
use qkmeans::geometry::Dataset;
use qkmeans::noiseless::{run_noiseless, ProbeOrder, SeedConfig};
use qkmeans::noisy::{run_noisy, run_noisy_outlier, ScaleMode};
use qkmeans::oracle::{OracleSession, PAIR_HASH_NAME};
use qkmeans::outlier::{run_outlier, GammaMode};
use qkmeans::report::ExperimentReport;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "qkm", version, about = "Query-based K-means experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base RNG seed; trial i derives its randomness from seed + i.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent trials.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Constant-factor preset for noisy recovery.
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// Output file (dataset for `gen`, JSON-lines report for `run`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

impl From<ScaleArg> for ScaleMode {
    fn from(value: ScaleArg) -> Self {
        match value {
            ScaleArg::Paper => ScaleMode::Paper,
            ScaleArg::Desk => ScaleMode::Desk,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian mixture dataset file.
    Gen(GenArgs),
    /// Run an algorithm for T independent trials against a dataset file.
    Run(RunArgs),
    /// Run a verification suite; exit 0 iff every check passes.
    Verify(VerifyArgs),
    /// Evaluate a bound formula and print it as JSON.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    po: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Side of the hypercube centers are drawn from.
    #[arg(long, default_value_t = 2.0)]
    spread: f64,
    /// Minimum pairwise center distance in sigmas.
    #[arg(long, default_value_t = 10.0)]
    min_sep: f64,
    /// eps for the outlier separation thresholds.
    #[arg(long, default_value_t = 0.1)]
    sep_eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Noiseless,
    Outlier,
    Noisy,
    NoisyOutlier,
}

impl Algorithm {
    fn name(&self) -> &'static str {
        match self {
            Algorithm::Noiseless => "noiseless",
            Algorithm::Outlier => "outlier",
            Algorithm::Noisy => "noisy",
            Algorithm::NoisyOutlier => "noisy-outlier",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_enum)]
    algorithm: Algorithm,
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Oracle flip probability for the noisy algorithms.
    #[arg(long, default_value_t = 0.1)]
    pe: f64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Outlier-rejection radius: a number, "inf", or "auto".
    #[arg(long, default_value = "auto")]
    gamma: String,
    /// Imbalance used in bound formulas; defaults to the realized value.
    #[arg(long)]
    alpha: Option<f64>,
    /// Safety cap on sampling draws.
    #[arg(long)]
    max_draws: Option<u64>,
    /// Probe representatives nearest-centroid-first instead of creation order.
    #[arg(long, default_value_t = false)]
    probe_nearest: bool,
    /// Also write a flat per-trial CSV (for plotting pipelines).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Centroid,
    Kl,
    Hypergeom,
    Dixie,
    Erlang,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Trials per Monte-Carlo cell (suite-specific default when omitted).
    #[arg(long)]
    trials: Option<u64>,
    /// Restrict the centroid/dixie suites to a single m.
    #[arg(long)]
    m: Option<usize>,
    /// Restrict the centroid suite to a single delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Restrict the dixie/erlang suites to a single k.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    Dixie,
    ThmQkmwol,
    ErlangMoments,
    NoisyM,
    NoisyOutlierParams,
    NoisyOutlierParamsAlt,
    MinClusterThreshold,
    Kl,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(value_enum)]
    formula: Formula,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    po: f64,
    #[arg(long, default_value_t = 0.1)]
    pe: f64,
    #[arg(long, default_value_t = 1000.0)]
    n: f64,
    /// x for the KL formula.
    #[arg(long, default_value_t = 0.1)]
    x: f64,
    /// y for the KL formula.
    #[arg(long, default_value_t = 0.5)]
    y: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn run(cli: Cli) -> Result<ExitCode, UsageError> {
    match cli.command {
        Command::Gen(ref args) => cmd_gen(&cli, args),
        Command::Run(ref args) => cmd_run(&cli, args),
        Command::Verify(ref args) => cmd_verify(args),
        Command::Bounds(ref args) => cmd_bounds(args),
    }
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<ExitCode, UsageError> {
    if args.alpha < 1.0 {
        return Err(UsageError("alpha must be >= 1".into()));
    }
    let out = cli
        .out
        .clone()
        .ok_or_else(|| UsageError("gen requires --out <file>".into()))?;
    let spec = MixtureSpec {
        n: args.n,
        k: args.k,
        d: args.d,
        alpha: args.alpha,
        p_o: args.po,
        sigma: args.sigma,
        center_spread: args.spread,
        min_center_sep_sigmas: args.min_sep,
        sep_eps: args.sep_eps,
        seed: cli.seed,
    };
    let (dataset, truth) = generate(&spec)?;
    let header = DatasetHeader::for_spec(&spec, &truth);
    datagen::write_dataset(&out, &dataset, &truth, &header)?;
    let gamma = compute_gamma(&dataset, &truth, 0.1)?;
    let s_min = truth.cluster_sizes().iter().min().copied().unwrap_or(0);
    println!(
        "{}",
        json!({
            "file": out,
            "n": truth.n(),
            "k": truth.k(),
            "d": args.d,
            "realized_alpha": truth.realized_alpha(),
            "gamma_0.1": gamma.gamma,
            "s_min": s_min,
            "outliers": truth.outlier_count(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_gamma(raw: &str) -> Result<GammaMode, UsageError> {
    match raw {
        "auto" => Ok(GammaMode::Auto),
        "inf" | "infinity" => Ok(GammaMode::Fixed(f64::INFINITY)),
        other => {
            let value: f64 = other
                .parse()
                .map_err(|_| UsageError(format!("bad --gamma value: {other}")))?;
            if value < 0.0 {
                return Err(UsageError("gamma must be nonnegative".into()));
            }
            Ok(GammaMode::Fixed(value))
        }
    }
}

struct TrialContext<'a> {
    dataset: &'a Dataset,
    truth: &'a GroundTruth,
    algorithm: Algorithm,
    delta: f64,
    eps: f64,
    pe: f64,
    alpha: f64,
    gamma: GammaMode,
    max_draws: Option<u64>,
    probe_order: ProbeOrder,
    scale: ScaleMode,
}

fn run_trial(ctx: &TrialContext, trial_id: u64, rng_seed: u64) -> Result<ExperimentReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let start = Instant::now();
    let outcome = match ctx.algorithm {
        Algorithm::Noiseless => {
            let mut session = OracleSession::noiseless(ctx.truth);
            let mut cfg =
                SeedConfig::new(ctx.truth.k(), ctx.delta, ctx.eps).map_err(|e| e.to_string())?;
            cfg.max_draws = ctx.max_draws;
            cfg.probe_order = ctx.probe_order;
            run_noiseless(&mut session, ctx.dataset, &cfg, &mut rng).map_err(|e| e.to_string())
        }
        Algorithm::Outlier => {
            let mut session = OracleSession::noiseless(ctx.truth);
            let mut cfg =
                SeedConfig::new(ctx.truth.k(), ctx.delta, ctx.eps).map_err(|e| e.to_string())?;
            cfg.max_draws = ctx.max_draws;
            cfg.probe_order = ctx.probe_order;
            run_outlier(&mut session, ctx.dataset, &cfg, ctx.gamma, &mut rng)
                .map_err(|e| e.to_string())
        }
        Algorithm::Noisy => {
            let mut session =
                OracleSession::noisy(ctx.truth, ctx.pe, rng_seed).map_err(|e| e.to_string())?;
            run_noisy(
                &mut session,
                ctx.dataset,
                ctx.truth.k(),
                ctx.delta,
                ctx.eps,
                ctx.alpha,
                ctx.scale,
                &mut rng,
            )
            .map_err(|e| e.to_string())
        }
        Algorithm::NoisyOutlier => {
            let mut session =
                OracleSession::noisy(ctx.truth, ctx.pe, rng_seed).map_err(|e| e.to_string())?;
            run_noisy_outlier(
                &mut session,
                ctx.dataset,
                ctx.truth.k(),
                ctx.delta,
                ctx.eps,
                ctx.alpha,
                ctx.truth.p_o(),
                ctx.scale,
                &mut rng,
            )
            .map_err(|e| e.to_string())
        }
    };
    let wall = start.elapsed().as_secs_f64() * 1e3;
    outcome.map(|(_, _, mut report)| {
        report.trial_id = trial_id;
        report.rng_seed = rng_seed;
        report.wall_time_ms = wall;
        report
    })
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<ExitCode, UsageError> {
    if args.trials == 0 {
        return Err(UsageError("--trials must be >= 1".into()));
    }
    let (dataset, truth, header) = datagen::read_dataset(&args.dataset)?;
    let alpha = args.alpha.unwrap_or_else(|| truth.realized_alpha());
    let gamma = parse_gamma(&args.gamma)?;
    let scale: ScaleMode = cli.scale.into();
    let probe_order = if args.probe_nearest {
        ProbeOrder::NearestCentroid
    } else {
        ProbeOrder::Creation
    };
    let config = json!({
        "algorithm": args.algorithm.name(),
        "dataset": args.dataset,
        "n": header.n,
        "k": header.k,
        "d": header.d,
        "p_o": truth.p_o(),
        "delta": args.delta,
        "eps": args.eps,
        "p_e": args.pe,
        "alpha": alpha,
        "gamma": args.gamma,
        "scale": scale.name(),
        "seed": cli.seed,
        "trials": args.trials,
        "oracle_hash": PAIR_HASH_NAME,
        "prng": PRNG_NAME,
        "subgraph_retention": "retain-unassigned-and-top-up",
    });

    let ctx = TrialContext {
        dataset: &dataset,
        truth: &truth,
        algorithm: args.algorithm,
        delta: args.delta,
        eps: args.eps,
        pe: args.pe,
        alpha,
        gamma,
        max_draws: args.max_draws,
        probe_order,
        scale,
    };
    let trial_ids: Vec<u64> = (0..args.trials).collect();
    let results: Vec<Result<ExperimentReport, String>> = if cli.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| UsageError(e.to_string()))?;
        pool.install(|| {
            use rayon::prelude::*;
            trial_ids
                .par_iter()
                .map(|&t| run_trial(&ctx, t, cli.seed + t))
                .collect()
        })
    } else {
        trial_ids
            .iter()
            .map(|&t| run_trial(&ctx, t, cli.seed + t))
            .collect()
    };

    let mut rows: Vec<String> = Vec::with_capacity(results.len() + 1);
    let mut ok_reports: Vec<ExperimentReport> = Vec::new();
    for (t, result) in trial_ids.iter().zip(results) {
        match result {
            Ok(mut report) => {
                report.config = config.clone();
                rows.push(serde_json::to_string(&report).expect("report serializes"));
                ok_reports.push(report);
            }
            Err(message) => {
                rows.push(
                    json!({
                        "trial_id": t,
                        "rng_seed": cli.seed + t,
                        "error": message,
                        "config": config.clone(),
                    })
                    .to_string(),
                );
            }
        }
    }
    rows.push(aggregate_row(&config, args, &ok_reports).to_string());

    let payload = rows.join("\n") + "\n";
    match &cli.out {
        Some(path) => fs::write(path, payload)?,
        None => {
            std::io::stdout().write_all(payload.as_bytes())?;
        }
    }
    if let Some(csv_path) = &args.csv {
        fs::write(csv_path, reports_to_csv(&ok_reports))?;
    }
    if ok_reports.is_empty() {
        eprintln!("all {} trials errored", args.trials);
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// Flat per-trial CSV: scalar metrics first, then the bound values (sorted
/// keys, identical across trials of one run).
fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    let bound_keys: Vec<&String> = reports
        .first()
        .map(|r| r.bound_values.keys().collect())
        .unwrap_or_default();
    out.push_str(
        "trial_id,rng_seed,draws,queries_total,queries_phase1,queries_phase2,\
         potential_achieved,potential_reference,potential_ratio,\
         misclassification_ratio,outlier_precision,outlier_recall,wall_time_ms",
    );
    for key in &bound_keys {
        out.push(',');
        out.push_str(key);
    }
    out.push('\n');
    for r in reports {
        use std::fmt::Write as _;
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial_id,
            r.rng_seed,
            r.draws,
            r.queries_total,
            r.queries_phase1,
            r.queries_phase2,
            r.potential_achieved,
            r.potential_reference,
            r.potential_ratio,
            r.misclassification_ratio,
            r.outlier_precision,
            r.outlier_recall,
            r.wall_time_ms
        )
        .expect("write to string");
        for key in &bound_keys {
            let value = r.bound_values.get(*key).copied().unwrap_or(f64::NAN);
            write!(out, ",{value}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn mean<F: Fn(&ExperimentReport) -> f64>(reports: &[ExperimentReport], f: F) -> f64 {
    if reports.is_empty() {
        return f64::NAN;
    }
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

fn aggregate_row(
    config: &serde_json::Value,
    args: &RunArgs,
    reports: &[ExperimentReport],
) -> serde_json::Value {
    let success_fraction = if reports.is_empty() {
        0.0
    } else {
        reports
            .iter()
            .filter(|r| r.potential_ratio <= 1.0 + args.eps)
            .count() as f64
            / reports.len() as f64
    };
    let mean_queries = mean(reports, |r| r.queries_total as f64);
    // Bound rows are identical across trials; compare the mean against them.
    let mut verdicts = serde_json::Map::new();
    if let Some(first) = reports.first() {
        for (name, value) in &first.bound_values {
            if name == "thm_qkmwol_total" || name == "dixie_query_bound" {
                verdicts.insert(
                    name.clone(),
                    json!(if mean_queries <= *value { "pass" } else { "fail" }),
                );
            }
        }
    }
    json!({
        "aggregate": true,
        "config": config,
        "trials": args.trials,
        "errors": args.trials as usize - reports.len(),
        "success_fraction": success_fraction,
        "success_rule": "potential_ratio <= 1 + eps",
        "mean_draws": mean(reports, |r| r.draws as f64),
        "mean_queries_total": mean_queries,
        "mean_queries_phase1": mean(reports, |r| r.queries_phase1 as f64),
        "mean_queries_phase2": mean(reports, |r| r.queries_phase2 as f64),
        "mean_potential_ratio": mean(reports, |r| r.potential_ratio),
        "mean_misclassification_ratio": mean(reports, |r| r.misclassification_ratio),
        "mean_outlier_precision": mean(reports, |r| r.outlier_precision),
        "mean_outlier_recall": mean(reports, |r| r.outlier_recall),
        "mean_wall_time_ms": mean(reports, |r| r.wall_time_ms),
        "bound_verdicts": verdicts,
    })
}

/// One verification check: evidence JSON plus pass/fail.
struct Check {
    evidence: serde_json::Value,
    pass: bool,
}

fn binomial_slack(rate: f64, trials: u64) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

fn verify_centroid(trials: u64, m_filter: Option<usize>, delta_filter: Option<f64>) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(424242);
    use rand::Rng as _;
    // Three fixed point sets: uniform cube, two blobs, a line.
    let cube: Vec<qkmeans::geometry::Point> = (0..60)
        .map(|_| qkmeans::geometry::Point::new(vec![rng.gen(), rng.gen(), rng.gen()]).unwrap())
        .collect();
    let blobs: Vec<qkmeans::geometry::Point> = (0..60)
        .map(|i| {
            let offset = if i % 2 == 0 { 0.0 } else { 5.0 };
            qkmeans::geometry::Point::new(vec![
                offset + 0.1 * rng.gen::<f64>(),
                offset + 0.1 * rng.gen::<f64>(),
            ])
            .unwrap()
        })
        .collect();
    let line: Vec<qkmeans::geometry::Point> = (0..60)
        .map(|i| qkmeans::geometry::Point::new(vec![i as f64 / 59.0]).unwrap())
        .collect();
    let sets: [(&str, &[qkmeans::geometry::Point]); 3] =
        [("cube", &cube), ("two-blob", &blobs), ("line", &line)];

    let ms = m_filter.map(|m| vec![m]).unwrap_or_else(|| vec![5, 10, 50]);
    let deltas = delta_filter
        .map(|d| vec![d])
        .unwrap_or_else(|| vec![0.05, 0.1, 0.2]);
    let mut checks = Vec::new();
    for (name, points) in sets {
        for &m in &ms {
            for &delta in &deltas {
                let paired =
                    bounds::centroid_lemma_paired(points, m, delta, trials, 1000 + m as u64)
                        .expect("valid cell");
                let needed = 1.0 - delta;
                let slack_wr =
                    3.0 * binomial_slack(paired.with_replacement_loose_rate.min(0.999), trials);
                let slack_wor =
                    3.0 * binomial_slack(paired.without_replacement_tight_rate.min(0.999), trials);
                let pass = paired.with_replacement_loose_rate >= needed - slack_wr
                    && paired.without_replacement_tight_rate >= needed - slack_wor
                    && paired.without_replacement_loose_rate
                        >= paired.with_replacement_loose_rate;
                checks.push(Check {
                    evidence: json!({
                        "suite": "centroid",
                        "set": name,
                        "m": m,
                        "delta": delta,
                        "trials": trials,
                        "with_replacement_rate": paired.with_replacement_loose_rate,
                        "without_replacement_loose_rate": paired.without_replacement_loose_rate,
                        "without_replacement_tight_rate": paired.without_replacement_tight_rate,
                        "required": needed,
                        "pass": pass,
                    }),
                    pass,
                });
            }
        }
    }
    checks
}

fn verify_kl() -> Vec<Check> {
    let mut violations = 0u64;
    let mut cells = 0u64;
    for xi in 1..100 {
        for yi in xi..100 {
            let x = xi as f64 / 100.0;
            let y = yi as f64 / 100.0;
            let kl = bounds::kl_bernoulli(x, y).expect("domain");
            let q = bounds::kl_quadratic_bound(x, y).expect("domain");
            cells += 1;
            if kl < q || (xi != yi && kl <= q) {
                violations += 1;
            }
        }
    }
    let spot = bounds::kl_bernoulli(0.1, 0.5).expect("domain");
    let spot_ok = (spot - 0.3681).abs() <= 1e-4;
    let pass = violations == 0 && spot_ok;
    vec![Check {
        evidence: json!({
            "suite": "kl",
            "grid_cells": cells,
            "violations": violations,
            "spot_kl_0.1_0.5": spot,
            "pass": pass,
        }),
        pass,
    }]
}

fn verify_hypergeom(trials: u64) -> Vec<Check> {
    let configs: Vec<(usize, Vec<f64>, usize)> = vec![
        (10_000, vec![1.0], 400),
        (10_000, vec![0.1, 0.2, 0.3, 0.4], 400),
        (10_000, vec![0.1, 0.2, 0.3, 0.4], 200),
        (10_000, vec![0.25, 0.25, 0.25, 0.25], 400),
    ];
    configs
        .into_iter()
        .enumerate()
        .map(|(i, (n, probs, m))| {
            let check =
                bounds::hypergeom_tail_check(n, &probs, m, trials, 2000 + i as u64).expect("cell");
            let pass = check.empirical >= check.bound - 0.01;
            Check {
                evidence: json!({
                    "suite": "hypergeom",
                    "n": n,
                    "probs": probs,
                    "m": m,
                    "trials": trials,
                    "empirical": check.empirical,
                    "bound": check.bound,
                    "pass": pass,
                }),
                pass,
            }
        })
        .collect()
}

fn verify_dixie(trials: u64, k_filter: Option<usize>, m_filter: Option<usize>) -> Vec<Check> {
    let ks = k_filter.map(|k| vec![k]).unwrap_or_else(|| vec![2, 5, 10]);
    let ms = m_filter.map(|m| vec![m]).unwrap_or_else(|| vec![2, 5, 50]);
    let mut checks = Vec::new();
    for &k in &ks {
        for &m in &ms {
            for (label, alpha) in [("uniform", 1.0), ("skewed", 2.0)] {
                let probs = if alpha == 1.0 {
                    vec![1.0 / k as f64; k]
                } else {
                    bounds::skewed_type_probs(k, alpha)
                };
                let mean =
                    bounds::simulate_dixie_mean_draws(&probs, m, trials, 3000 + (k * m) as u64);
                let bound = bounds::dixie_bound(alpha, k, m);
                let pass = mean <= bound;
                checks.push(Check {
                    evidence: json!({
                        "suite": "dixie",
                        "k": k,
                        "m": m,
                        "probs": label,
                        "alpha": alpha,
                        "trials": trials,
                        "mean_draws": mean,
                        "bound": bound,
                        "pass": pass,
                    }),
                    pass,
                });
            }
        }
    }
    checks
}

fn verify_erlang(draws: u64, k_filter: Option<usize>) -> Vec<Check> {
    let ks = k_filter.map(|k| vec![k]).unwrap_or_else(|| vec![2, 4, 8]);
    let mut checks = Vec::new();
    for &k in &ks {
        for m in [2usize, 5] {
            for p_o in [0.0, 0.2] {
                let (ex_bound, ex2_bound) =
                    bounds::erlang_max_moments(1.0, k, p_o, m).expect("domain");
                let rate = (1.0 - p_o) / k as f64;
                let rates = vec![rate; k];
                let (mean, mean_sq) =
                    bounds::simulate_erlang_max_moments(&rates, m, draws, 4000 + k as u64)
                        .expect("domain");
                let pass = mean <= ex_bound && mean_sq <= ex2_bound;
                checks.push(Check {
                    evidence: json!({
                        "suite": "erlang",
                        "k": k,
                        "m": m,
                        "p_o": p_o,
                        "draws": draws,
                        "mean_max": mean,
                        "mean_max_bound": ex_bound,
                        "mean_sq": mean_sq,
                        "mean_sq_bound": ex2_bound,
                        "pass": pass,
                    }),
                    pass,
                });
            }
        }
    }
    checks
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, UsageError> {
    let mut checks = Vec::new();
    match args.suite {
        Suite::Centroid => {
            checks.extend(verify_centroid(args.trials.unwrap_or(10_000), args.m, args.delta))
        }
        Suite::Kl => checks.extend(verify_kl()),
        Suite::Hypergeom => checks.extend(verify_hypergeom(args.trials.unwrap_or(10_000))),
        Suite::Dixie => checks.extend(verify_dixie(args.trials.unwrap_or(10_000), args.k, args.m)),
        Suite::Erlang => checks.extend(verify_erlang(args.trials.unwrap_or(100_000), args.k)),
        Suite::All => {
            checks.extend(verify_centroid(args.trials.unwrap_or(10_000), None, None));
            checks.extend(verify_kl());
            checks.extend(verify_hypergeom(args.trials.unwrap_or(10_000)));
            checks.extend(verify_dixie(args.trials.unwrap_or(10_000), None, None));
            checks.extend(verify_erlang(args.trials.unwrap_or(100_000), None));
        }
    }
    let mut all_pass = true;
    for check in &checks {
        println!("{}", check.evidence);
        all_pass &= check.pass;
    }
    if all_pass {
        println!("{}", json!({"verdict": "pass", "checks": checks.len()}));
        Ok(ExitCode::SUCCESS)
    } else {
        let failing: Vec<&serde_json::Value> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| &c.evidence)
            .collect();
        eprintln!("{}", json!({"verdict": "fail", "failing": failing}));
        Ok(ExitCode::from(1))
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<ExitCode, UsageError> {
    let value = match args.formula {
        Formula::Dixie => json!({
            "formula": "dixie",
            "alpha": args.alpha, "k": args.k, "m": args.m,
            "value": bounds::dixie_bound(args.alpha, args.k, args.m),
        }),
        Formula::ThmQkmwol => {
            let b = bounds::thm_qkmwol(args.alpha, args.k, args.delta, args.eps, args.po)?;
            json!({
                "formula": "thm-qkmwol",
                "alpha": args.alpha, "k": args.k, "delta": args.delta,
                "eps": args.eps, "p_o": args.po,
                "phase1": b.phase1, "phase2": b.phase2, "total": b.total,
            })
        }
        Formula::ErlangMoments => {
            let (ex, ex2) = bounds::erlang_max_moments(args.alpha, args.k, args.po, args.m)?;
            json!({
                "formula": "erlang-moments",
                "alpha": args.alpha, "k": args.k, "p_o": args.po, "m": args.m,
                "ex_bound": ex, "ex2_bound": ex2,
            })
        }
        Formula::NoisyM => {
            let (m_tilde, m) = bounds::noisy_m(args.alpha, args.k, args.delta, args.eps, args.pe)?;
            json!({
                "formula": "noisy-m",
                "alpha": args.alpha, "k": args.k, "delta": args.delta,
                "eps": args.eps, "p_e": args.pe,
                "m_tilde": m_tilde, "m": m,
            })
        }
        Formula::NoisyOutlierParams => {
            let p = bounds::noisy_outlier_params(
                args.alpha, args.k, args.delta, args.eps, args.pe, args.po,
            )?;
            json!({
                "formula": "noisy-outlier-params",
                "alpha": args.alpha, "k": args.k, "delta": args.delta,
                "eps": args.eps, "p_e": args.pe, "p_o": args.po,
                "m_tilde": p.m_tilde, "m": p.m, "n": p.n,
            })
        }
        Formula::NoisyOutlierParamsAlt => {
            let p = bounds::noisy_outlier_params_alt(
                args.alpha, args.k, args.delta, args.eps, args.pe, args.po,
            )?;
            json!({
                "formula": "noisy-outlier-params-alt",
                "alpha": args.alpha, "k": args.k, "delta": args.delta,
                "eps": args.eps, "p_e": args.pe, "p_o": args.po,
                "m_tilde": p.m_tilde, "m": p.m, "n": p.n,
            })
        }
        Formula::MinClusterThreshold => json!({
            "formula": "min-cluster-threshold",
            "n": args.n, "k": args.k, "eps": args.eps,
            "value": bounds::min_cluster_threshold(args.n, args.k, args.eps),
        }),
        Formula::Kl => {
            let kl = bounds::kl_bernoulli(args.x, args.y)?;
            let quad = bounds::kl_quadratic_bound(args.x, args.y)?;
            json!({
                "formula": "kl",
                "x": args.x, "y": args.y,
                "kl": kl, "quadratic_bound": quad,
            })
        }
    };
    println!("{value}");
    Ok(ExitCode::SUCCESS)
}
