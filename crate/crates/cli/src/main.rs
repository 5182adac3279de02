use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use deconfound::estimators::{EstimatorResult, GlmConfig, Method, TrimConfig};
use deconfound::glm::{CvSpec, LambdaSpec, Penalty};
use deconfound::harness::{
    estimate_dataset, load_dataset_csv, run_overlap_curve, run_simulation_grid, run_verification_suite_with,
    write_atomically, CsvSchema, ExperimentConfig, ExperimentReport, ModelSpec, Nuisance, ReportFormat, Setting,
    VerifyConfig,
};
use deconfound::overlap::{LinkSpec, QuadratureConfig};
use deconfound::scores::default_w_grid;
use deconfound::Error;

const THREADS_VAR: &str = "DECONFOUND_THREADS";

#[derive(Debug, Parser)]
#[command(name = "deconfound", version, about = "Deconfounding-score ATT experiments")]
struct Cli {
    /// Log verbosity: -v info, -vv debug, -vvv trace.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulation grid and emit an RMSE/bias/SD report.
    Simulate(SimulateArgs),
    /// Overlap divergence along the score family.
    OverlapCurve(CurveArgs),
    /// Estimate the ATT of one CSV dataset on covariates and on every score.
    Estimate(EstimateArgs),
    /// Run the oracle verification suite; exits 3 when a check fails.
    Verify(VerifyArgs),
    /// Re-emit a report in another format, or print the default config.
    Emit(EmitArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Worker count; falls back to the config, then to DECONFOUND_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// `S_T,S_Y` pair; repeatable.
    #[arg(long = "setting", value_parser = parse_setting)]
    settings: Vec<Setting>,
    /// `OUTCOME/PROPENSITY` penalties, e.g. `ridge/lasso`; repeatable.
    #[arg(long = "model", value_parser = parse_model)]
    models: Vec<ModelSpec>,
    /// Comma-separated w values in [-1, 1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w_grid: Option<Vec<f64>>,
    /// Comma-separated subset of regr, ipw, aipw.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    estimators: Option<Vec<Method>>,
    /// Semi-synthetic CSV dataset with mu0 and mu1 columns.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Use the true outcome and propensity models.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    trim_epsilon: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Report format; inferred from the output extension when absent.
    #[arg(long, value_parser = parse_format)]
    format: Option<ReportFormat>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinkArg {
    Logistic,
    Indicator,
    Relu,
    ExpTilt,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    link: LinkArg,
    /// Inner product of the prognostic and propensity directions.
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    /// Comma-separated w values; defaults to the 21-point grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w_grid: Option<Vec<f64>>,
    /// Treated fraction; defaults to the link's own.
    #[arg(long)]
    pi1: Option<f64>,
    /// Threshold of the indicator link.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z0: f64,
    /// Tilt of the exponential link.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    tilt: f64,
    #[arg(long)]
    outer_nodes: Option<usize>,
    #[arg(long)]
    inner_nodes: Option<usize>,
    /// CSV path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// CSV dataset with columns t, y, x1..xp.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "lasso", value_parser = parse_penalty)]
    outcome_penalty: Penalty,
    #[arg(long, default_value = "lasso", value_parser = parse_penalty)]
    propensity_penalty: Penalty,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    estimators: Option<Vec<Method>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trim_epsilon: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws for the Monte Carlo oracles.
    #[arg(long)]
    samples: Option<usize>,
    /// Draws per point of the efficiency lower-bound sweep.
    #[arg(long)]
    sweep_samples: Option<usize>,
    /// JSON path; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmitArgs {
    /// Report to convert; its format follows the extension.
    #[arg(long, required_unless_present = "default_config", conflicts_with = "default_config")]
    input: Option<PathBuf>,
    /// Print the default experiment config as TOML.
    #[arg(long)]
    default_config: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<ReportFormat>,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Verification,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Verification => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn config_error(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    let (t, y) = s.split_once(',').ok_or("expected S_T,S_Y")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(Setting {
        s_t: num(t)?,
        s_y: num(y)?,
    })
}

fn parse_model(s: &str) -> Result<ModelSpec, String> {
    let (o, p) = s.split_once('/').ok_or("expected OUTCOME/PROPENSITY")?;
    Ok(ModelSpec::new(parse_penalty(o)?, parse_penalty(p)?))
}

fn parse_penalty(s: &str) -> Result<Penalty, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("{THREADS_VAR} must be a worker count, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_atomically(p, text.as_bytes()).map_err(Failure::from),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Data(format!("cannot write to stdout: {e}"))),
    }
}

fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String, Failure> {
    Ok(match format {
        ReportFormat::Csv => report.to_csv_string()?,
        ReportFormat::Json => report.to_json_string()?,
    })
}

fn resolve_format(explicit: Option<ReportFormat>, output: Option<&Path>) -> ReportFormat {
    explicit.unwrap_or_else(|| output.map(ReportFormat::from_path).unwrap_or(ReportFormat::Csv))
}

fn experiment_config(args: &SimulateArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml_file(path).map_err(config_error)?,
        None => ExperimentConfig::default(),
    };
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(s) = args.master_seed {
        cfg.master_seed = s;
    }
    match (args.threads, cfg.threads) {
        (Some(t), _) => cfg.threads = t,
        (None, 0) => cfg.threads = threads_from_env()?.unwrap_or(0),
        _ => {}
    }
    if !args.settings.is_empty() {
        cfg.settings = args.settings.clone();
    }
    if !args.models.is_empty() {
        cfg.model_grid = args.models.clone();
    }
    if let Some(w) = &args.w_grid {
        cfg.w_grid = w.clone();
    }
    if let Some(m) = &args.estimators {
        cfg.estimators = m.clone();
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    cfg.oracle |= args.oracle;
    if let Some(n) = args.n {
        cfg.dgp.n = n;
    }
    if let Some(p) = args.p {
        cfg.dgp.p = p;
    }
    if let Some(e) = args.trim_epsilon {
        cfg.trim = TrimConfig { epsilon: e };
    }
    if let Some(o) = &args.output {
        cfg.output_path = Some(o.clone());
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = experiment_config(args)?;
    log::info!(
        "running {} replications over {} settings with {} workers",
        cfg.replications,
        cfg.resolved_settings().len(),
        cfg.threads
    );
    let report = run_simulation_grid(&cfg)?;
    let format = resolve_format(args.format, cfg.output_path.as_deref());
    write_output(cfg.output_path.as_deref(), &render_report(&report, format)?)
}

fn overlap_curve(args: &CurveArgs) -> Result<(), Failure> {
    let link = match args.link {
        LinkArg::Logistic => LinkSpec::logistic(),
        LinkArg::Indicator => LinkSpec::indicator(args.z0),
        LinkArg::Relu => LinkSpec::relu(),
        LinkArg::ExpTilt => LinkSpec::exp_tilt(args.tilt),
    };
    let mut quad = QuadratureConfig::default();
    if let Some(n) = args.outer_nodes {
        quad.outer_nodes = n;
    }
    if let Some(n) = args.inner_nodes {
        quad.inner_nodes = n;
    }
    quad.validate().map_err(config_error)?;
    let grid = args.w_grid.clone().unwrap_or_else(default_w_grid);
    let curve = run_overlap_curve(&link, args.c, &grid, args.pi1, &quad).map_err(config_error)?;
    write_output(args.output.as_deref(), &curve.to_csv_string())
}

fn results_csv(results: &[EstimatorResult]) -> Result<String, Failure> {
    let mut out = String::from("estimator,score_label,tau_hat,fallback,trim_count\n");
    for r in results {
        let fallback = serde_json::to_value(r.fallback).map_err(|e| Failure::Data(e.to_string()))?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            r.score_label,
            r.tau_hat,
            fallback.as_str().unwrap_or_default(),
            r.trim_count
        ));
    }
    Ok(out)
}

fn estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let trim = match args.trim_epsilon {
        Some(e) => TrimConfig { epsilon: e },
        None => TrimConfig::default(),
    };
    trim.validate().map_err(config_error)?;
    let grid = args.w_grid.clone().unwrap_or_else(default_w_grid);
    if let Some(w) = grid.iter().find(|w| !(w.is_finite() && w.abs() <= 1.0)) {
        return Err(Failure::Config(format!("w grid value {w} lies outside [-1, 1]")));
    }
    let methods = args.estimators.clone().unwrap_or_else(|| Method::ALL.to_vec());
    if methods.is_empty() {
        return Err(Failure::Config("at least one estimator is required".into()));
    }
    let dataset = load_dataset_csv(&args.data, &CsvSchema::default()).map_err(|e| Failure::Data(e.to_string()))?;
    let glm = GlmConfig {
        outcome_penalty: args.outcome_penalty,
        propensity_penalty: args.propensity_penalty,
        lambda: LambdaSpec::Cv(CvSpec {
            seed: args.seed,
            ..CvSpec::default()
        }),
        ..GlmConfig::default()
    };
    let results = estimate_dataset(&dataset, &Nuisance::Fitted(glm), &grid, &methods, &trim, args.seed)
        .map_err(|e| Failure::Data(e.to_string()))?;
    let text = match resolve_format(args.format, args.output.as_deref()) {
        ReportFormat::Csv => results_csv(&results)?,
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&results).map_err(|e| Failure::Data(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    write_output(args.output.as_deref(), &text)
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let mut cfg = VerifyConfig::new(args.seed);
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    if let Some(s) = args.sweep_samples {
        cfg.sweep_samples = s;
    }
    cfg.validate().map_err(config_error)?;
    let report = run_verification_suite_with(&cfg);
    for c in &report.checks {
        log::info!("{} {}", if c.passed { "pass" } else { "FAIL" }, c.name);
    }
    let mut text = report.to_json_string();
    text.push('\n');
    write_output(args.output.as_deref(), &text)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn emit(args: &EmitArgs) -> Result<(), Failure> {
    if args.default_config {
        let text = ExperimentConfig::default().to_toml_string().map_err(config_error)?;
        return write_output(args.output.as_deref(), &text);
    }
    let input = args.input.as_deref().expect("clap requires an input");
    let text = std::fs::read_to_string(input)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", input.display())))?;
    let report = match ReportFormat::from_path(input) {
        ReportFormat::Csv => ExperimentReport::from_csv_str(&text),
        ReportFormat::Json => ExperimentReport::from_json_str(&text),
    }
    .map_err(|e| Failure::Data(e.to_string()))?;
    let format = resolve_format(args.format, args.output.as_deref());
    write_output(args.output.as_deref(), &render_report(&report, format)?)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::OverlapCurve(a) => overlap_curve(a),
        Command::Estimate(a) => estimate(a),
        Command::Verify(a) => verify(a),
        Command::Emit(a) => emit(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Data(m) => eprintln!("error: {m}"),
                Failure::Verification => eprintln!("error: verification suite failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
