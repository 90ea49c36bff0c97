//! `sparsepce` command-line tool.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format problems, 3 a fit that
//! did not converge when `--strict` is given.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sparsepce::basis::{BasisSpec, Truncation};
use sparsepce::dataset::read_inputs_csv;
use sparsepce::rvm::{fit, FitConfig, InitStrategy, PriorConfig};
use sparsepce::study::{run_study, StudyConfig, StudyKind};
use sparsepce::surrogate::{l2_distance, r_squared, relative_mse};
use sparsepce::{fit_cs, CsConfig, Dataset, Error, OhaganInstance, SparsePce};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sparsepce", version, about = "Sparse polynomial chaos surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a seeded O'Hagan benchmark into a CSV file.
    Synth(SynthArgs),
    /// Fit a sparse expansion with the variational relevance vector machine.
    FitRvm(FitRvmArgs),
    /// Fit an expansion by l1 minimisation (Douglas-Rachford).
    FitCs(FitCsArgs),
    /// Evaluate a model at input points.
    Predict(PredictArgs),
    /// Compare two models on a validation set.
    Compare(CompareArgs),
    /// Mean, standard deviation, skewness and kurtosis of a model output.
    Moments(MomentsArgs),
    /// Run a parameter study on the O'Hagan benchmark.
    Study(StudyArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Input dimension K.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Number of samples.
    #[arg(long, short = 'n')]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV, `-` for stdout. A file output gets a `<out>.instance.json`
    /// sidecar describing the function.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct BasisArgs {
    /// Training data CSV (`xi_1..xi_K,y`).
    #[arg(long)]
    data: PathBuf,
    /// Truncation order P.
    #[arg(long)]
    order: u32,
    /// Truncation rule: TD, LQ, TP or HC.
    #[arg(long, default_value = "TD")]
    truncation: String,
    /// Exponent for LQ truncation.
    #[arg(long)]
    q: Option<f64>,
    /// Expected input dimension; checked against the data when given.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value_t = 1e-6)]
    a: f64,
    #[arg(long, default_value_t = 1e-6)]
    b: f64,
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    #[arg(long, default_value_t = 1e-6)]
    u: f64,
    #[arg(long, default_value_t = 1e-6)]
    w: f64,
    /// Relative parameter change that ends the iteration.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Relative change of the success probabilities that allows pruning.
    #[arg(long, default_value_t = 1e-4)]
    pi_tol: f64,
    /// Terms with success probability at or below this are pruned.
    #[arg(long, default_value_t = 0.01)]
    pi_threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
    /// Starting point: prior, neutral, continuation or best.
    #[arg(long, default_value = "best")]
    init: String,
}

impl PriorArgs {
    fn configs(&self) -> Result<(PriorConfig, FitConfig), Failure> {
        let prior = PriorConfig {
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            u: self.u,
            w: self.w,
        };
        let config = FitConfig {
            delta: self.tol,
            delta_pi: self.pi_tol,
            eps_pi: self.pi_threshold,
            max_sweeps: self.max_sweeps,
            init: InitStrategy::parse(&self.init)?,
            ..FitConfig::default()
        };
        prior.validate()?;
        config.validate()?;
        Ok((prior, config))
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitRvmArgs {
    #[command(flatten)]
    basis: BasisArgs,
    #[command(flatten)]
    prior: PriorArgs,
    /// Exit with code 3 if the fit did not converge.
    #[arg(long)]
    strict: bool,
    /// Model JSON, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitCsArgs {
    #[command(flatten)]
    basis: BasisArgs,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Residual radius; 0 asks for exact interpolation.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input CSV; a trailing output column is ignored.
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model_a: PathBuf,
    #[arg(long)]
    model_b: PathBuf,
    /// Validation CSV with outputs.
    #[arg(long)]
    validation: PathBuf,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Monte Carlo samples for skewness and kurtosis.
    #[arg(long, default_value_t = 100_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct StudyArgs {
    /// vary-c, vary-p or vary-n.
    #[arg(long)]
    kind: String,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Base truncation order (overridden by vary-p).
    #[arg(long, default_value_t = 4)]
    order: u32,
    #[arg(long, default_value = "TD")]
    truncation: String,
    #[arg(long)]
    q: Option<f64>,
    /// Base training-set size (overridden by vary-n).
    #[arg(long, default_value_t = 600)]
    n_train: usize,
    #[arg(long, default_value_t = 10_000)]
    n_validation: usize,
    #[arg(long, default_value_t = 100_000)]
    n_reference: usize,
    #[arg(long, default_value_t = 100_000)]
    n_moments: usize,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    /// Also fit the compressive-sensing baseline in every cell.
    #[arg(long)]
    with_cs: bool,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    prior: PriorArgs,
    /// Report JSON, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: String,
    /// Also write one CSV row per cell here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A failed command with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Truncation(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => synth(a),
        Command::FitRvm(a) => fit_rvm(a),
        Command::FitCs(a) => fit_cs_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Compare(a) => compare(a),
        Command::Moments(a) => moments(a),
        Command::Study(a) => study(a),
    }
}

/// Writes `bytes` to `out`, or stdout for `-`.
fn emit(out: &str, bytes: &[u8]) -> Result<(), Failure> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| Failure::data(format!("cannot write to stdout: {e}")))
    } else {
        std::fs::write(out, bytes).map_err(|e| Failure::data(format!("cannot write {out}: {e}")))
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::data(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn load_model(path: &Path) -> Result<SparsePce, Failure> {
    SparsePce::load(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    Dataset::from_csv_path(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    if a.dim == 0 {
        return Err(Failure::usage("--dim must be at least 1"));
    }
    let instance = OhaganInstance::new(a.dim, a.seed)?;
    let data = instance.sample_dataset(a.n, a.seed)?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    emit(&a.out, &csv)?;
    if a.out != "-" {
        emit(&format!("{}.instance.json", a.out), &json_line(&instance)?)?;
    }
    Ok(())
}

fn basis_and_data(b: &BasisArgs) -> Result<(BasisSpec, Dataset), Failure> {
    let truncation = Truncation::parse(&b.truncation, b.q)?;
    let data = load_data(&b.data)?;
    if let Some(dim) = b.dim {
        if dim != data.dim() {
            return Err(Failure::data(format!(
                "--dim {dim} but {} has {} input columns",
                b.data.display(),
                data.dim()
            )));
        }
    }
    let spec = BasisSpec::new(data.dim(), b.order, truncation)?;
    Ok((spec, data))
}

fn check_convergence(converged: bool, strict: bool) -> Result<(), Failure> {
    if !converged {
        eprintln!("warning: fit did not converge");
        if strict {
            return Err(Failure {
                code: 3,
                message: "fit did not converge (--strict)".into(),
            });
        }
    }
    Ok(())
}

fn fit_rvm(a: FitRvmArgs) -> Result<(), Failure> {
    let (prior, config) = a.prior.configs()?;
    let (spec, data) = basis_and_data(&a.basis)?;
    let result = fit(&data, &spec, &prior, &config)?;
    let pce = &result.pce;
    let between = pce.success_prob().iter().filter(|&&p| p > 0.01 && p <= 0.95).count();
    eprintln!(
        "terms {}  active {}  sweeps {}  converged {}  start {}",
        spec.len(),
        result.state.active.len(),
        result.sweeps,
        result.converged,
        result.start.name()
    );
    eprintln!(
        "sparsity: {:.2}% with pi > 0.01, {:.2}% with pi > 0.95, {between} terms in between",
        pce.sparsity_index(0.01),
        pce.sparsity_index(0.95)
    );
    emit(&a.out, &json_line(pce)?)?;
    check_convergence(result.converged, a.strict)
}

fn fit_cs_cmd(a: FitCsArgs) -> Result<(), Failure> {
    let config = CsConfig {
        gamma: a.gamma,
        max_iters: a.max_iters,
        tol: a.tol,
        epsilon: a.epsilon,
    };
    config.validate()?;
    let (spec, data) = basis_and_data(&a.basis)?;
    let pce = fit_cs(&data, &spec, &config)?;
    eprintln!(
        "terms {}  significant {:.2}%  converged {}",
        spec.len(),
        pce.sparsity_index(0.95),
        pce.converged()
    );
    emit(&a.out, &json_line(&pce)?)?;
    check_convergence(pce.converged(), a.strict)
}

fn predict(a: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&a.model)?;
    let xi = read_inputs_csv(&a.inputs, model.basis().dim())
        .map_err(|e| Failure::data(format!("{}: {e}", a.inputs.display())))?;
    let predictions = model.predict(&xi)?;
    let mut out = String::from("y\n");
    for p in predictions {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    emit(&a.out, out.as_bytes())
}

#[derive(Serialize)]
struct Comparison {
    #[serde(rename = "mse_A")]
    mse_a: f64,
    #[serde(rename = "mse_B")]
    mse_b: f64,
    l2_sq_distance: f64,
    #[serde(rename = "r2_A")]
    r2_a: f64,
    #[serde(rename = "r2_B")]
    r2_b: f64,
    #[serde(rename = "sparsity_A")]
    sparsity_a: f64,
    #[serde(rename = "sparsity_B")]
    sparsity_b: f64,
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let ma = load_model(&a.model_a)?;
    let mb = load_model(&a.model_b)?;
    let distance = l2_distance(&ma, &mb).map_err(|e| Failure::data(e.to_string()))?;
    let validation = load_data(&a.validation)?;
    let pa = ma.predict(validation.xi())?;
    let pb = mb.predict(validation.xi())?;
    let report = Comparison {
        mse_a: relative_mse(&pa, validation.y())?,
        mse_b: relative_mse(&pb, validation.y())?,
        l2_sq_distance: distance,
        r2_a: r_squared(&pa, validation.y())?,
        r2_b: r_squared(&pb, validation.y())?,
        sparsity_a: ma.sparsity_index(0.95),
        sparsity_b: mb.sparsity_index(0.95),
    };
    emit(&a.out, &json_line(&report)?)
}

#[derive(Serialize)]
struct MomentsReport {
    mean: f64,
    std: f64,
    skewness: f64,
    kurtosis: f64,
    n_mc: usize,
    seed: u64,
}

fn moments(a: MomentsArgs) -> Result<(), Failure> {
    if a.n_mc == 0 {
        return Err(Failure::usage("--n-mc must be at least 1"));
    }
    let model = load_model(&a.model)?;
    let m = model.moments(a.n_mc, a.seed)?;
    let report = MomentsReport {
        mean: m.mean,
        std: m.std,
        skewness: m.skewness,
        kurtosis: m.kurtosis,
        n_mc: a.n_mc,
        seed: a.seed,
    };
    emit(&a.out, &json_line(&report)?)
}

fn study(a: StudyArgs) -> Result<(), Failure> {
    let kind = StudyKind::parse(&a.kind)?;
    let (prior, fit) = a.prior.configs()?;
    let mut config = StudyConfig::new(kind, a.grid.clone());
    config.seed = a.seed;
    config.dim = a.dim;
    config.order = a.order;
    config.rule = a.truncation.clone();
    config.q = a.q;
    config.n_train = a.n_train;
    config.n_validation = a.n_validation;
    config.n_reference = a.n_reference;
    config.n_moments = a.n_moments;
    config.bootstrap = a.bootstrap;
    config.prior = prior;
    config.fit = fit;
    config.cs = a.with_cs.then(CsConfig::default);
    let report = run_study(&config, a.jobs)?;
    eprint!("{}", report.render_table());
    let mut json = report.to_json()?;
    json.push('\n');
    emit(&a.out, json.as_bytes())?;
    if let Some(path) = &a.csv {
        let file =
            std::fs::File::create(path).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
        report.write_csv(file)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(Failure::from(Error::InvalidArgument("x".into())).code, 1);
        assert_eq!(Failure::from(Error::Data("x".into())).code, 2);
        assert_eq!(Failure::from(Error::NonFinite { row: 0, col: 1 }).code, 2);
        assert!(check_convergence(false, false).is_ok());
        assert_eq!(check_convergence(false, true).unwrap_err().code, 3);
    }

    #[test]
    fn command_line_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
