//! Command-line front-end: JSON config in, JSON/CSV records out, frozen exit
//! codes (0 ok, 1 check failed, 2 bad input, 3 numerical failure).

use crate::config::{self, LossAssumptions, SgdConfig, Strategy, ValidatedProblem};
use crate::mechanisms::{rdp_to_dp, RdpCurve};
use crate::optimizer::{self, BoundResult, OptimizerError, SweepAxis};
use crate::oracle::{
    self, coupled_w_inf_check, estimate_holder, verify_bound, DatasetVariant, ToyKind,
    ToyProblem1D,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(name = "hsa", version, about = "Hidden-state accounting for projected Noisy-SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the RDP bound and baselines for one configuration.
    Bound(BoundArgs),
    /// Sweep the bound along T or alpha and emit a table.
    Sweep(SweepArgs),
    /// Run the 1-D numerical verification suite.
    Verify(VerifyArgs),
    /// Estimate a Hölder constant for a built-in gradient function.
    EstimateHolder(EstimateArgs),
}

#[derive(Args)]
struct BoundArgs {
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated alpha grid overriding the config.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Negative control: scales every theoretical bound before checking.
    #[arg(long)]
    tamper: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Built-in gradient name: abs_cuberoot_grad, linear, constant.
    name: String,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    T,
    Alpha,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Deserialize)]
struct FileConfig {
    assumptions: LossAssumptions,
    sgd: SgdSection,
    accounting: Accounting,
    #[serde(default)]
    run: RunSection,
}

#[derive(Deserialize)]
struct SgdSection {
    eta: f64,
    sigma: f64,
    clip_k: f64,
    n: usize,
    b: usize,
    t: usize,
    diameter_d: f64,
    strategy: Strategy,
}

#[derive(Deserialize)]
struct Accounting {
    alpha: Vec<f64>,
    #[serde(default)]
    delta: Option<f64>,
}

#[derive(Deserialize, Default)]
struct RunSection {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    num_sequences: Option<usize>,
}

#[derive(Serialize, Clone)]
pub struct RunManifest {
    pub config_path: String,
    pub subcommand: String,
    pub output: Option<String>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    fn new(config: &PathBuf, subcommand: &str, output: &Option<PathBuf>, seed: u64) -> Self {
        Self {
            config_path: config.display().to_string(),
            subcommand: subcommand.to_string(),
            output: output.as_ref().map(|p| p.display().to_string()),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    fn csv_comments(&self) -> String {
        format!(
            "# config: {}\n# subcommand: {}\n# seed: {}\n# tool_version: {}\n# timestamp: {}\n",
            self.config_path, self.subcommand, self.seed, self.tool_version, self.timestamp
        )
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exit
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match cli.command {
        Command::Bound(args) => cmd_bound(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::EstimateHolder(args) => cmd_estimate_holder(args),
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("HSA_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn load_config(path: &PathBuf) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
}

fn build_problem(fc: &FileConfig, alpha: f64) -> Result<ValidatedProblem, String> {
    let sgd = &fc.sgd;
    let config = SgdConfig {
        eta: sgd.eta,
        sigma: sgd.sigma,
        clip_k: sgd.clip_k,
        n: sgd.n,
        b: sgd.b,
        t: sgd.t,
        diameter_d: sgd.diameter_d,
        strategy: sgd.strategy,
        alpha,
    };
    config::validate(&fc.assumptions, &config).map_err(|violations| {
        violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    })
}

fn optimizer_exit(e: &OptimizerError) -> i32 {
    match e {
        OptimizerError::Mechanism(_) | OptimizerError::Trace(_) => EXIT_NUMERICAL,
        _ => EXIT_BAD_INPUT,
    }
}

fn emit(output: &Option<PathBuf>, body: &str) -> i32 {
    match output {
        Some(path) => match std::fs::write(path, body) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("cannot write {}: {e}", path.display());
                EXIT_BAD_INPUT
            }
        },
        None => {
            println!("{body}");
            EXIT_OK
        }
    }
}

#[derive(Serialize)]
struct ScheduleSummary {
    tau: usize,
    steps: usize,
    max_shift: f64,
    min_beta: f64,
}

impl ScheduleSummary {
    fn of(r: &BoundResult) -> Self {
        Self {
            tau: r.schedule.tau,
            steps: r.schedule.a.len(),
            max_shift: r.schedule.a.iter().cloned().fold(0.0, f64::max),
            min_beta: r.schedule.beta.iter().cloned().fold(1.0, f64::min),
        }
    }
}

#[derive(Serialize)]
struct BoundRecord {
    alpha: f64,
    epsilon: f64,
    composition: f64,
    output_perturbation: f64,
    schedule: ScheduleSummary,
    diagnostics: crate::optimizer::Diagnostics,
}

fn cmd_bound(args: BoundArgs) -> i32 {
    let fc = match load_config(&args.config) {
        Ok(fc) => fc,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_BAD_INPUT;
        }
    };
    let alphas = args.alpha.clone().unwrap_or_else(|| fc.accounting.alpha.clone());
    if alphas.is_empty() {
        eprintln!("empty alpha grid");
        return EXIT_BAD_INPUT;
    }
    let seed = args.seed.or(fc.run.seed).unwrap_or(0);
    let num_sequences = fc.run.num_sequences.unwrap_or(50);
    let output = args
        .output
        .clone()
        .or_else(|| fc.run.output.as_ref().map(PathBuf::from));

    let mut records = Vec::new();
    for &alpha in &alphas {
        let problem = match build_problem(&fc, alpha) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_BAD_INPUT;
            }
        };
        match optimizer::compute_bound(&problem, num_sequences, seed) {
            Ok(r) => records.push(BoundRecord {
                alpha,
                epsilon: r.epsilon,
                composition: r.composition,
                output_perturbation: r.output_perturbation,
                schedule: ScheduleSummary::of(&r),
                diagnostics: r.diagnostics,
            }),
            Err(e) => {
                eprintln!("bound computation failed: {e}");
                return optimizer_exit(&e);
            }
        }
    }

    let delta = args.delta.or(fc.accounting.delta);
    let dp = delta.and_then(|d| {
        let mut points: Vec<(f64, f64)> = records.iter().map(|r| (r.alpha, r.epsilon)).collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        points.dedup_by(|a, b| a.0 == b.0);
        let curve = RdpCurve::new(points).ok()?;
        let (eps, alpha) = rdp_to_dp(&curve, d).ok()?;
        Some(serde_json::json!({ "epsilon": eps, "delta": d, "alpha": alpha }))
    });

    let manifest = RunManifest::new(&args.config, "bound", &output, seed);
    let body = serde_json::to_string_pretty(&serde_json::json!({
        "results": records,
        "epsilon_dp": dp,
        "manifest": manifest,
    }))
    .expect("serializable record");
    match args.format {
        Format::Json | Format::Csv => emit(&output, &body),
    }
}

fn cmd_sweep(args: SweepArgs) -> i32 {
    let fc = match load_config(&args.config) {
        Ok(fc) => fc,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_BAD_INPUT;
        }
    };
    if args.values.is_empty() {
        eprintln!("sweep requires a nonempty --values list");
        return EXIT_BAD_INPUT;
    }
    let alphas = args.alpha.clone().unwrap_or_else(|| fc.accounting.alpha.clone());
    let base_alpha = match alphas.first() {
        Some(&a) => a,
        None => {
            eprintln!("empty alpha grid");
            return EXIT_BAD_INPUT;
        }
    };
    let seed = args.seed.or(fc.run.seed).unwrap_or(0);
    let num_sequences = fc.run.num_sequences.unwrap_or(50);
    let problem = match build_problem(&fc, base_alpha) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_BAD_INPUT;
        }
    };
    let axis = match args.axis {
        Axis::T => SweepAxis::T,
        Axis::Alpha => SweepAxis::Alpha,
    };
    let rows = match optimizer::sweep(&problem, axis, &args.values, num_sequences, seed) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("sweep failed: {e}");
            return optimizer_exit(&e);
        }
    };
    let manifest = RunManifest::new(&args.config, "sweep", &args.output, seed);
    let body = match args.format {
        Format::Csv => {
            let mut out = manifest.csv_comments();
            out.push_str("axis_value,epsilon,composition,output_perturbation,tau,runtime_ms\n");
            for row in &rows {
                out.push_str(&format!(
                    "{},{:.11e},{:.11e},{:.11e},{},{:.3}\n",
                    row.axis_value,
                    row.result.epsilon,
                    row.result.composition,
                    row.result.output_perturbation,
                    row.result.schedule.tau,
                    row.runtime_ms,
                ));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "rows": rows,
            "manifest": manifest,
        }))
        .expect("serializable record"),
    };
    emit(&args.output, &body)
}

#[derive(Serialize)]
struct CheckRecord {
    name: String,
    numeric: f64,
    theoretical: f64,
    margin: f64,
    pass: bool,
}

/// Deterministic toy suite exercising the strongly convex and Hölder classes
/// at the config's noise scale.
fn verification_suite(seed: u64, base: &SgdSection) -> Vec<(String, ToyProblem1D, LossAssumptions)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Vec::new();
    for idx in 0..3 {
        let m = 0.5 + rng.gen::<f64>();
        let data: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() - 0.5).collect();
        let toy = ToyProblem1D {
            kind: ToyKind::Quadratic { m },
            data,
            differing: idx % 5,
            data_alt: rng.gen::<f64>() - 0.5,
            config: SgdConfig {
                eta: 0.1,
                sigma: base.sigma.clamp(0.2, 1.0),
                clip_k: 0.0,
                n: 5,
                b: 5,
                t: 5 + idx * 4,
                diameter_d: 1.0,
                strategy: Strategy::FullBatch,
                alpha: 2.0,
            },
        };
        let mut toy = toy;
        toy.config.clip_k = toy.max_gradient() * 1.05 + 0.05;
        let assumptions = LossAssumptions {
            holder_l: m,
            holder_lambda: 1.0,
            convexity: config::Convexity::StronglyConvex { m },
            lipschitz_k: toy.max_gradient(),
        };
        suite.push((format!("quadratic_{idx}"), toy, assumptions));
    }
    for idx in 0..2 {
        let scale: Vec<f64> = (0..5).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let data: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() - 0.5).collect();
        let max_scale = scale.iter().cloned().fold(0.0, f64::max);
        let mut toy = ToyProblem1D {
            kind: ToyKind::Holder { scale },
            data,
            differing: (idx + 1) % 5,
            data_alt: rng.gen::<f64>() - 0.5,
            config: SgdConfig {
                eta: 0.1,
                sigma: base.sigma.clamp(0.2, 1.0),
                clip_k: 0.0,
                n: 5,
                b: 5,
                t: 6 + idx * 5,
                diameter_d: 1.0,
                strategy: Strategy::FullBatch,
                alpha: 2.0,
            },
        };
        toy.config.clip_k = toy.max_gradient() * 1.05 + 0.05;
        let assumptions = LossAssumptions {
            holder_l: 2.0_f64.powf(2.0 / 3.0) * max_scale,
            holder_lambda: 1.0 / 3.0,
            convexity: config::Convexity::NonConvex,
            lipschitz_k: toy.max_gradient(),
        };
        suite.push((format!("holder_{idx}"), toy, assumptions));
    }
    suite
}

fn cmd_verify(args: VerifyArgs) -> i32 {
    let fc = match load_config(&args.config) {
        Ok(fc) => fc,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_BAD_INPUT;
        }
    };
    if args.trials == 0 {
        eprintln!("trials must be positive");
        return EXIT_BAD_INPUT;
    }
    let seed = args.seed.or(fc.run.seed).unwrap_or(42);
    let tamper = args.tamper.unwrap_or(1.0);

    let mut checks: Vec<CheckRecord> = Vec::new();
    for (name, toy, assumptions) in verification_suite(seed, &fc.sgd) {
        let problem = match config::validate(&assumptions, &toy.config) {
            Ok(p) => p,
            Err(v) => {
                eprintln!("internal suite config invalid: {v:?}");
                return EXIT_NUMERICAL;
            }
        };
        let mut bound = match optimizer::compute_bound(&problem, 1, seed) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("bound computation failed: {e}");
                return optimizer_exit(&e);
            }
        };
        bound.epsilon *= tamper;
        let report = match verify_bound(&toy, toy.config.alpha, &bound, 1024) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("oracle failure in {name}: {e}");
                return EXIT_NUMERICAL;
            }
        };
        checks.push(CheckRecord {
            name: format!("{name}/divergence"),
            numeric: report.numeric,
            theoretical: report.theoretical,
            margin: report.margin,
            pass: report.pass,
        });

        let trace = match problem.update_lipschitz {
            Some(c) => crate::tracking::track_full_lipschitz(
                c,
                toy.config.eta,
                toy.config.clip_k,
                toy.config.n,
                toy.config.diameter_d,
                toy.config.t,
            ),
            None => crate::tracking::track_full_holder(
                assumptions.holder_l,
                assumptions.holder_lambda,
                toy.config.eta,
                toy.config.clip_k,
                toy.config.n,
                toy.config.diameter_d,
                toy.config.t,
            ),
        };
        let coupled = coupled_w_inf_check(&toy, &trace, args.trials, seed ^ 0x5bd1e995);
        checks.push(CheckRecord {
            name: format!("{name}/coupled_w_inf"),
            numeric: coupled.max_deviation,
            theoretical: coupled.max_deviation - coupled.max_excess,
            margin: -coupled.max_excess,
            pass: coupled.pass,
        });
    }

    // propagation sanity: identical datasets give zero divergence
    {
        let (_, mut toy, _) = verification_suite(seed, &fc.sgd).remove(0);
        toy.data_alt = toy.data[toy.differing];
        let p = oracle::propagate_density(&toy, DatasetVariant::Primary, toy.config.t, 1024);
        let q = oracle::propagate_density(&toy, DatasetVariant::Adjacent, toy.config.t, 1024);
        let pass = match (p, q) {
            (Ok(p), Ok(q)) => matches!(oracle::symmetric_renyi(&p, &q, 2.0), Ok(v) if v <= 1e-12),
            _ => false,
        };
        checks.push(CheckRecord {
            name: "identical_datasets/divergence".into(),
            numeric: 0.0,
            theoretical: 0.0,
            margin: 0.0,
            pass,
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    for c in checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "check failed: {} (numeric {:.6e} > theoretical {:.6e})",
            c.name, c.numeric, c.theoretical
        );
    }
    let manifest = RunManifest::new(&args.config, "verify", &args.output, seed);
    let body = serde_json::to_string_pretty(&serde_json::json!({
        "checks": checks,
        "all_pass": all_pass,
        "tamper": tamper,
        "manifest": manifest,
    }))
    .expect("serializable record");
    let code = emit(&args.output, &body);
    if code != EXIT_OK {
        return code;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn cmd_estimate_holder(args: EstimateArgs) -> i32 {
    let Some((grad, default_lambda, analytic)) = oracle::zoo(&args.name) else {
        eprintln!("unknown gradient function: {}", args.name);
        return EXIT_BAD_INPUT;
    };
    let lambda = args.lambda.unwrap_or(default_lambda);
    if !(lambda > 0.0 && lambda <= 1.0) || args.pairs == 0 {
        eprintln!("lambda must lie in (0,1] and pairs must be positive");
        return EXIT_BAD_INPUT;
    }
    let estimate = estimate_holder(grad, -1.0, 1.0, lambda, args.pairs, args.seed);
    let body = serde_json::to_string_pretty(&serde_json::json!({
        "name": args.name,
        "lambda": lambda,
        "pairs": args.pairs,
        "seed": args.seed,
        "estimate": estimate,
        "analytic": analytic,
    }))
    .expect("serializable record");
    emit(&args.output, &body)
}
