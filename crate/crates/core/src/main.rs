use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdeproj::harness::report::{self, Format};
use sdeproj::harness::selftest::run_selftest;
use sdeproj::harness::{
    default_methods, run_convergence, run_drift, DriftConfig, DriftReport, MethodSpec, SolverSettings, StudyConfig,
};
use sdeproj::models::{build_model, parse_params, ModelKind};
use sdeproj::noise::TruncationConfig;
use sdeproj::projection::{Direction, ProjectionConfig};
use sdeproj::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "sdeproj", version, about = "Projection methods for SDEs with conserved quantities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean-square convergence study against a fine T2 reference.
    Convergence(ConvergenceArgs),
    /// Invariant errors along one sample path (summary plus CSV).
    Drift(PathArgs),
    /// Export one sample path with invariant errors as CSV.
    Path(PathArgs),
    /// List bundled models and their parameters.
    ListModels,
    /// Run the structural property checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// kubo | pendulum | lotka
    #[arg(long)]
    model: String,
    /// Model parameters, e.g. `a=1,sigma=1`.
    #[arg(long)]
    params: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct NumericsArgs {
    #[arg(long, default_value_t = TruncationConfig::DEFAULT_K)]
    truncation_k: u32,
    #[arg(long)]
    no_truncation: bool,
    /// xhat | x
    #[arg(long, default_value = "xhat")]
    projection_direction: String,
    #[arg(long, default_value_t = 1e-12)]
    newton_tol: f64,
    #[arg(long, default_value_t = 25)]
    newton_max_iter: usize,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma list; a `P` suffix adds projection (e.g. `euler,eulerP,t2`).
    #[arg(long)]
    methods: Option<String>,
    /// Step sizes, e.g. `2^-3,2^-4` or `0.125,0.0625`.
    #[arg(long)]
    h_levels: Option<String>,
    #[arg(long, default_value = "2^-14")]
    h_ref: String,
    #[arg(long, default_value_t = 10_000)]
    paths: u64,
    #[arg(long, default_value_t = 20_190_101)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    numerics: NumericsArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args, Debug)]
struct PathArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Single method, e.g. `eulerP`.
    #[arg(long, alias = "methods")]
    method: String,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 20_190_101)]
    seed: u64,
    #[command(flatten)]
    numerics: NumericsArgs,
    /// Write every `stride`-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_step(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.strip_prefix("2^") {
        Some(exp) => exp
            .parse::<i32>()
            .map(|e| 2f64.powi(e))
            .map_err(|_| Error::Config(format!("bad step '{s}'")))?,
        None => s.parse::<f64>().map_err(|_| Error::Config(format!("bad step '{s}'")))?,
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("step '{s}' must be positive")))
    }
}

fn model_setup(args: &ModelArgs) -> Result<(ModelKind, Vec<(String, f64)>)> {
    let kind: ModelKind = args.model.parse()?;
    let params = args.params.as_deref().map(parse_params).transpose()?.unwrap_or_default();
    build_model(kind, &params)?;
    Ok((kind, params))
}

fn numerics(args: &NumericsArgs) -> Result<(SolverSettings, ProjectionConfig)> {
    let truncation = if args.no_truncation {
        TruncationConfig::disabled()
    } else {
        TruncationConfig::new(args.truncation_k)?
    };
    let solver = SolverSettings { truncation, ..SolverSettings::default() };
    let projection = ProjectionConfig {
        direction: args.projection_direction.parse::<Direction>()?,
        newton_tol: args.newton_tol,
        newton_max_iter: args.newton_max_iter,
    };
    projection.validate()?;
    Ok((solver, projection))
}

fn convergence(args: ConvergenceArgs) -> Result<()> {
    let (kind, params) = model_setup(&args.model)?;
    let (solver, projection) = numerics(&args.numerics)?;
    let format: Format = args.format.parse()?;
    let cfg = StudyConfig {
        params,
        x0: args.model.x0.clone(),
        methods: match &args.methods {
            Some(s) => MethodSpec::parse_list(s)?,
            None => default_methods(kind),
        },
        t_end: args.t_end,
        h_levels: match &args.h_levels {
            Some(s) => s.split(',').map(parse_step).collect::<Result<_>>()?,
            None => kind.default_h_levels(),
        },
        h_ref: parse_step(&args.h_ref)?,
        paths: args.paths,
        seed: args.seed,
        workers: args.workers,
        solver,
        projection,
        ..StudyConfig::for_model(kind)
    };
    let rep = run_convergence(&cfg)?;
    print!("{}", report::summary_table(&rep));
    let out = args.out.unwrap_or_else(|| {
        PathBuf::from(format!("convergence_{kind}.{}", if format == Format::Csv { "csv" } else { "json" }))
    });
    report::export_report(&rep, format, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn path_run(args: PathArgs, summary: bool) -> Result<()> {
    let (kind, params) = model_setup(&args.model)?;
    let (solver, projection) = numerics(&args.numerics)?;
    let (h_default, t_default) = match kind {
        ModelKind::Kubo => (0.02, 200.0),
        ModelKind::Pendulum => (0.01, 100.0),
        ModelKind::Lotka => (0.01, 200.0),
    };
    let cfg = DriftConfig {
        params,
        x0: args.model.x0.clone(),
        solver,
        projection,
        ..DriftConfig::new(
            kind,
            args.method.parse()?,
            args.h.unwrap_or(h_default),
            args.t_end.unwrap_or(t_default),
            args.seed,
        )
    };
    let rep = run_drift(&cfg)?;
    let csv = report::drift_csv(&rep, args.stride);
    if summary {
        print_drift_summary(&rep);
    }
    match args.out {
        Some(p) => {
            report::write_file(&p, &csv)?;
            eprintln!("wrote {}", p.display());
        }
        None if !summary => print!("{csv}"),
        None => {
            let p = PathBuf::from(format!("drift_{kind}_{}.csv", rep.method.replace('/', "")));
            report::write_file(&p, &csv)?;
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn print_drift_summary(rep: &DriftReport) {
    println!("method {} over {} steps", rep.method, rep.rows.len().saturating_sub(1));
    for (label, e) in rep.labels.iter().zip(rep.max_inv_err()) {
        println!("  max |{label}(X_n) - {label}(X_0)| = {e:.3e}");
    }
    if rep.labels.len() > 1 {
        println!("  max combined error        = {:.3e}", rep.max_combined_err());
    }
}

fn list_models() {
    for kind in ModelKind::ALL {
        let params: Vec<String> = kind.default_params().iter().map(|(k, v)| format!("{k}={v}")).collect();
        let x0: Vec<String> = kind.default_x0().iter().map(|v| v.to_string()).collect();
        println!("{:<9} {}", kind.name(), kind.description());
        println!("          params {}  x0 {}", params.join(","), x0.join(","));
    }
}

fn selftest(seed: u64) -> Result<bool> {
    let checks = run_selftest(seed)?;
    let mut ok = true;
    for c in &checks {
        println!("[{}] {:<45} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Convergence(a) => convergence(a),
        Command::Drift(a) => path_run(a, true),
        Command::Path(a) => path_run(a, false),
        Command::ListModels => {
            list_models();
            Ok(())
        }
        Command::Selftest { seed } => match selftest(seed) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
