use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use vmfe_core::experiment::{ExperimentSpec, GridOptions};
use vmfe_core::io::{self, FitReportDocument};
use vmfe_core::{fit, log_likelihood, seeded_rng, Error, FitConfig, FitMethod, GeneratorKind, Init};

const EXIT_OTHER: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "vmfe", version, about = "Sample, fit and evaluate vMF elliptical distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a parameter file.
    Sample(SampleArgs),
    /// Fit parameters to a data CSV by maximum likelihood.
    Fit(FitArgs),
    /// Print the total log-likelihood of a data CSV.
    Eval(EvalArgs),
    /// Run the synthetic recovery grid.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    GradientDescent,
    FixedPoint,
}

impl From<MethodArg> for FitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::GradientDescent => FitMethod::GradientDescent,
            MethodArg::FixedPoint => FitMethod::FixedPoint,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Moment,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_generator)]
    generator: GeneratorKind,
    #[arg(long, value_enum, default_value = "gradient-descent")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    /// Skip screening of extra starts along the skew axis.
    #[arg(long)]
    no_screen: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_params: PathBuf,
    /// JSON report; the log-likelihood trace goes next to it as `<report>.trace.csv`.
    #[arg(long)]
    out_report: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON spec; flags given alongside override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_generator)]
    generators: Option<Vec<GeneratorKind>>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    eccentricity_max: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, env = "VMFE_THREADS")]
    threads: Option<usize>,
    /// Record wall-clock time per fit; outputs are then no longer byte-stable.
    #[arg(long)]
    timing: bool,
}

fn parse_generator(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => EXIT_PARSE,
        Error::Domain(_)
        | Error::Shape { .. }
        | Error::DegeneratePoint { .. }
        | Error::Singular(_)
        | Error::NoMoment(_)
        | Error::DegenerateData(_) => EXIT_DOMAIN,
        Error::StalledStep(_) | Error::NonFinite { .. } => EXIT_CONVERGENCE,
        Error::Io(_) => EXIT_IO,
        #[allow(unreachable_patterns)]
        _ => EXIT_OTHER,
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn cmd_sample(a: SampleArgs) -> Result<u8, Error> {
    let params = io::read_params(&a.params).map_err(|e| with_path(&a.params, e))?;
    let data = params.sample(a.n, &mut seeded_rng(a.seed));
    io::write_samples_file(&a.out, &data).map_err(|e| with_path(&a.out, e))?;
    Ok(0)
}

fn cmd_fit(a: FitArgs) -> Result<u8, Error> {
    let data = io::read_samples_file(&a.data).map_err(|e| with_path(&a.data, e))?;
    let config = FitConfig {
        method: a.method.into(),
        learning_rate: a.lr,
        max_iters: a.max_iters,
        tol: a.tol,
        init: match a.init {
            InitArg::Random => Init::Random,
            InitArg::Moment => Init::Moment,
        },
        screen: !a.no_screen,
    };
    let report = fit(&data, a.generator, &config, &mut seeded_rng(a.seed))?;
    io::write_params(&a.out_params, &report.params).map_err(|e| with_path(&a.out_params, e))?;
    let mut trace_path = a.out_report.clone().into_os_string();
    trace_path.push(".trace.csv");
    let trace_path = PathBuf::from(trace_path);
    io::write_trace(&trace_path, &report.loglik_trace).map_err(|e| with_path(&trace_path, e))?;
    let doc = FitReportDocument {
        generator: a.generator,
        method: config.method.as_str().to_string(),
        n: data.n(),
        loglik: report.final_loglik(),
        iters: report.iters,
        converged: report.converged,
        trace_path: trace_path.display().to_string(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    text.push('\n');
    std::fs::write(&a.out_report, text).map_err(|e| with_path(&a.out_report, e.into()))?;
    if !report.converged {
        warn!("fit stopped after {} iterations without meeting the tolerance", report.iters);
        return Ok(EXIT_CONVERGENCE);
    }
    Ok(0)
}

fn cmd_eval(a: EvalArgs) -> Result<u8, Error> {
    let params = io::read_params(&a.params).map_err(|e| with_path(&a.params, e))?;
    let data = io::read_samples_file(&a.data).map_err(|e| with_path(&a.data, e))?;
    println!("{}", io::format_significant(log_likelihood(&data, &params)?, 12));
    Ok(0)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<u8, Error> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| with_path(path, e.into()))?;
            io::experiment_spec_from_str(&text).map_err(|e| with_path(path, e))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(v) = a.taus {
        spec.taus = v;
    }
    if let Some(v) = a.dims {
        spec.dims = v;
    }
    if let Some(v) = a.generators {
        spec.generators = v;
    }
    if let Some(v) = a.n_samples {
        spec.n_samples = v;
    }
    if let Some(v) = a.trials {
        spec.trials = v;
    }
    if let Some(v) = a.eccentricity_max {
        spec.eccentricity_max = v;
    }
    if let Some(v) = a.method {
        spec.method = v.into();
    }
    if let Some(v) = a.max_iters {
        spec.max_iters = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let options = GridOptions {
        threads: a.threads,
        record_timing: a.timing,
    };
    let summary = io::run_experiment(&spec, &a.out_dir, &options).map_err(|e| with_path(&a.out_dir, e))?;
    for s in &summary {
        log::info!(
            "{} m={} tau={} mean error ratio {} ({} converged)",
            s.generator,
            s.m,
            s.tau,
            s.mean_error_ratio,
            s.n_converged
        );
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
