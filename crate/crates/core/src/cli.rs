//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::data::{residuals, CensoredSample};
use crate::error::{Error, Result};
use crate::fit::{fit, partial_report, DzChoice, FitOptions};
use crate::rankest::{evaluate, Method};
use crate::scores::ScoreSpec;
use crate::simlab::{simulate, SimDesign};
use crate::solver::{InitRule, SolverConfig};
use crate::stepcdf::self_consistent;
use crate::varinf::{quasi_score_test, OmegaMethod};

#[derive(Debug, Parser)]
#[command(name = "rankaft", version, about = "Rank-based estimation for the censored AFT model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and report estimates, variances, tests and intervals.
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        variance: VarianceArgs,
        /// Null hypothesis for the reported tests (default 0).
        #[arg(long, allow_hyphen_values = true)]
        null: Option<Vector>,
    },
    /// Quasi-score test of a full-dimensional null; `--wald` also fits and adds the Wald test.
    Test {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        variance: VarianceArgs,
        #[arg(long, allow_hyphen_values = true)]
        null: Vector,
        #[arg(long)]
        wald: bool,
    },
    /// Dump the self-consistent estimator of the residual distribution as CSV.
    Km {
        input: PathBuf,
        /// Regression coefficients defining the residuals (default 0).
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<Vector>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the estimating function at `--beta` and print it as a JSON array.
    Psi {
        input: PathBuf,
        #[arg(long, default_value = "wilcoxon")]
        score: String,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<Vector>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation campaign from a TOML design file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "sim_out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// CSV with columns `time,status,x1,...,xp`.
    pub input: PathBuf,
    /// wilcoxon, logrank, normal:alpha=A, genf:m1=A,m2=B or gehan.
    #[arg(long, default_value = "wilcoxon")]
    pub score: String,
    /// zero, gehan or a comma-separated start vector.
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,
    /// TOML file with a `[solver]` table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VarianceArg {
    Huang,
    Mc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DzArg {
    Scale,
    Identity,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long, value_enum, default_value = "huang")]
    pub variance: VarianceArg,
    #[arg(long, default_value_t = 500)]
    pub mc_reps: usize,
    #[arg(long, value_enum, default_value = "scale")]
    pub dz: DzArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    solver: SolverConfig,
}

/// Comma-separated numeric vector argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl std::str::FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_vector(s).map(Vector)
    }
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse `{t}` as a number")))
        .collect()
}

/// Resolves a score name (or `gehan`) at sample size `n`.
pub fn parse_method(text: &str, n: usize) -> Result<Method> {
    if text.trim().eq_ignore_ascii_case("gehan") {
        return Ok(Method::Gehan);
    }
    Ok(Method::Rank(ScoreSpec::parse(text)?.build(n)?))
}

fn solver_config(model: &ModelArgs) -> Result<SolverConfig> {
    let mut cfg = match &model.config {
        Some(path) => toml::from_str::<FileConfig>(&std::fs::read_to_string(path)?)?.solver,
        None => SolverConfig::default(),
    };
    if let Some(init) = &model.init {
        cfg.init = match init.trim() {
            "zero" => InitRule::Zero,
            "gehan" => InitRule::Gehan,
            v => InitRule::Vector(parse_vector(v).map_err(Error::InvalidConfig)?),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
        }
    }
    Ok(())
}

fn load(input: &Path) -> Result<CensoredSample> {
    CensoredSample::from_csv_path(input)
}

fn fit_options(model: &ModelArgs, v: &VarianceArgs, n: usize, null: Option<Vec<f64>>) -> Result<FitOptions> {
    let mut opts = FitOptions::new(parse_method(&model.score, n)?);
    opts.variance = match v.variance {
        VarianceArg::Huang => OmegaMethod::Huang,
        VarianceArg::Mc => OmegaMethod::MonteCarlo,
    };
    opts.mc_reps = v.mc_reps;
    opts.dz = match v.dz {
        DzArg::Scale => DzChoice::Scale,
        DzArg::Identity => DzChoice::Identity,
    };
    if matches!(v.variance, VarianceArg::Mc) {
        opts.seed = resolve_seed(v.seed);
    }
    if !(v.level > 0.0 && v.level < 1.0) {
        return Err(Error::InvalidConfig("level must lie in (0, 1)".into()));
    }
    opts.level = v.level;
    opts.null = null;
    opts.solver = solver_config(model)?;
    Ok(opts)
}

/// Outcome of a command: JSON or text already emitted, plus the exit code.
fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fit { model, variance, null } => {
            let sample = load(&model.input)?;
            let opts = fit_options(&model, &variance, sample.n(), null.map(|v| v.0))?;
            match fit(&sample, &opts) {
                Ok(report) => {
                    emit(model.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
                    Ok(0)
                }
                Err(Error::NotConverged(outcome)) => {
                    let report = partial_report(&opts, *outcome);
                    emit(model.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
                    Ok(2)
                }
                Err(e) => Err(e),
            }
        }
        Command::Test { model, variance, null, wald: with_wald } => {
            let null = null.0;
            let sample = load(&model.input)?;
            sample.check_design()?;
            let method = parse_method(&model.score, sample.n())?;
            if null.len() != sample.p() {
                return Err(Error::InvalidConfig(format!("--null must have length {}", sample.p())));
            }
            let qs = quasi_score_test(&sample, &method, &null)?;
            let mut report = json!({ "quasi_score": qs });
            if with_wald {
                let opts = fit_options(&model, &variance, sample.n(), Some(null.clone()))?;
                let r = fit(&sample, &opts)?;
                report["wald"] = serde_json::to_value(&r.tests[1])?;
                report["beta_hat"] = serde_json::to_value(&r.beta_hat)?;
            }
            emit(model.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Km { input, beta, out } => {
            let sample = load(&input)?;
            let beta = beta.map(|v| v.0).unwrap_or_else(|| vec![0.0; sample.p()]);
            let cdf = self_consistent(&residuals(&sample, &beta)?)?;
            let mut buf = Vec::new();
            cdf.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("csv output is utf-8");
            emit(out.as_deref(), text.trim_end())?;
            Ok(0)
        }
        Command::Psi { input, score, beta, out } => {
            let sample = load(&input)?;
            let method = parse_method(&score, sample.n())?;
            let beta = beta.map(|v| v.0).unwrap_or_else(|| vec![0.0; sample.p()]);
            let (psi, _) = evaluate(&sample, &method, &beta, false)?;
            emit(out.as_deref(), &serde_json::to_string(&psi)?)?;
            Ok(0)
        }
        Command::Simulate { config, out, seed } => {
            let text = std::fs::read_to_string(&config)?;
            let table: toml::Table = toml::from_str(&text)?;
            let mut design: SimDesign = toml::from_str(&text)?;
            if seed.is_some() || !table.contains_key("seed") {
                design.seed = resolve_seed(seed);
            }
            let report = simulate(&design, &out)?;
            let failures: usize = report.cells.iter().flat_map(|c| c.failures.values()).sum();
            eprintln!("{} cells written to {} ({failures} failed replicate fits)", report.cells.len(), out.display());
            Ok(0)
        }
    }
}

/// Machine-readable error report.
pub fn error_json(e: &Error) -> Value {
    let mut body = json!({ "code": e.code(), "message": e.to_string() });
    match e {
        Error::NonpositiveTime { row, value } => {
            body["row"] = json!(row);
            body["value"] = json!(value);
        }
        Error::ConstantCovariate { column } => {
            body["column"] = json!(column);
            body["name"] = json!(format!("x{}", column + 1));
        }
        Error::NoBracket { coord, .. } => body["coordinate"] = json!(coord),
        _ => {}
    }
    json!({ "error": body })
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_) | Error::NoBracket { .. } | Error::NoSolutionEitherSide(_) => 2,
        Error::SingularSigma { .. } | Error::SingularXi { .. } | Error::SingularOmega => 3,
        _ => 1,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            println!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
