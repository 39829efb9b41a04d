//! `qestim` command-line interface: error/disturbance analysis of quantum
//! measurements from a JSON problem specification.
//!
//! Exit codes: 0 success, 2 validation/parse failure, 3 numerical failure
//! (e.g. the optimal-scheme construction finds no constraint root).

mod spec;

use clap::{Args, Parser, Subcommand};
use qestim::errdist::{disturbance, measurement_error, tradeoff_report};
use qestim::fisher::{classical_fisher, sld_fisher, StateFamily};
use qestim::optmeas::{attainability_sweep, min_gap, random_vindication_sweep};
use qestim::quantum_core::povm_from_kraus;
use qestim::simulate::{
    disturbance_scaling_experiment, variance_scaling_experiment, RunConfig,
};
use qestim::{ExtendedValue, GeneratorBasis};
use spec::{Problem, ProblemSpec, SpecError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qestim", version, about = "Error-disturbance analysis of quantum measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Problem specification file (JSON)
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Print results as machine-readable JSON
    #[arg(long)]
    json: bool,
    /// Also write results as CSV to this file
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Override the RNG seed from the spec
    #[arg(long)]
    seed: Option<u64>,
    /// Override the numerical tolerance from the spec
    #[arg(long)]
    tol: Option<f64>,
    /// Cap the worker thread count (default: machine parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Echo the parsed specification as JSON and exit
    #[arg(long)]
    dump_spec: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the orthonormal generator basis for dimension d
    Basis {
        #[command(flatten)]
        common: CommonArgs,
        /// Hilbert-space dimension (overrides the spec)
        #[arg(short, long)]
        dim: Option<usize>,
    },
    /// Measurement error of X under the spec's measurement
    Error {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Disturbance of Y under the spec's measurement
    Disturb {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full error-disturbance trade-off report
    Tradeoff {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build the bound-attaining scheme and sweep the mixing weight
    Optimal {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Randomized verification sweep of the trade-off inequalities
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Hilbert-space dimension (overrides the spec)
        #[arg(short, long)]
        dim: Option<usize>,
    },
    /// Monte Carlo estimator-variance scaling experiment
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<qestim::Error> for CliError {
    fn from(e: qestim::Error) -> Self {
        match e {
            qestim::Error::ConstructionFailed { .. }
            | qestim::Error::ExperimentUndefined
            | qestim::Error::NoRetrieval
            | qestim::Error::AllZeroCounts => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// 12 significant digits, stable across platforms.
fn sig12(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn ext12(v: &ExtendedValue) -> String {
    match v {
        ExtendedValue::Finite(x) => sig12(*x),
        ExtendedValue::Infinite => "inf".to_string(),
    }
}

fn opt_ext12(v: &Option<ExtendedValue>) -> String {
    v.as_ref().map(ext12).unwrap_or_default()
}

/// UTF-8, LF line endings, header row first.
fn write_csv(path: &PathBuf, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn load(common: &CommonArgs) -> Result<(ProblemSpec, Problem), CliError> {
    let path = common
        .spec
        .as_ref()
        .ok_or_else(|| CliError::Validation("missing --spec FILE".to_string()))?;
    let mut parsed = ProblemSpec::from_file(path)?;
    if let Some(seed) = common.seed {
        parsed.params.seed = seed;
    }
    if let Some(tol) = common.tol {
        parsed.params.tol = tol;
    }
    let problem = parsed.validate()?;
    Ok((parsed, problem))
}

/// Handles --threads and --dump-spec; returns None when the command should
/// stop after dumping.
fn preamble(common: &CommonArgs, parsed: &ProblemSpec) -> Result<bool, CliError> {
    if let Some(n) = common.threads {
        qestim::configure_threads(n);
    }
    if common.dump_spec {
        println!(
            "{}",
            serde_json::to_string_pretty(parsed).expect("spec serializes")
        );
        return Ok(false);
    }
    Ok(true)
}

fn require<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::Validation(format!("spec is missing required field `{field}`")))
}

fn cmd_basis(common: &CommonArgs, dim: Option<usize>) -> Result<(), CliError> {
    let d = match (dim, &common.spec) {
        (Some(d), _) => d,
        (None, Some(_)) => {
            let (parsed, _) = load(common)?;
            if !preamble(common, &parsed)? {
                return Ok(());
            }
            parsed.dim
        }
        (None, None) => return Err(CliError::Validation("need --dim or --spec".to_string())),
    };
    if let Some(n) = common.threads {
        qestim::configure_threads(n);
    }
    let basis = GeneratorBasis::new(d).map_err(CliError::from)?;
    // worst-case deviation of Tr(g_mu g_nu) from the identity Gram matrix
    let mut residual = 0.0f64;
    for (mu, a) in basis.generators().iter().enumerate() {
        for (nu, b) in basis.generators().iter().enumerate() {
            let g = (a.adjoint() * b).trace();
            let target = if mu == nu { 1.0 } else { 0.0 };
            residual = residual.max((g.re - target).abs()).max(g.im.abs());
        }
    }
    if common.json {
        let gens: Vec<spec::MatrixSpec> =
            basis.generators().iter().map(spec::matrix_to_spec).collect();
        let doc = serde_json::json!({
            "dim": d,
            "count": basis.len(),
            "orthonormality_residual": residual,
            "generators": gens,
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        println!("generator basis for d = {d}: {} matrices", basis.len());
        println!("orthonormality residual: {}", sig12(residual));
        for (mu, g) in basis.generators().iter().enumerate() {
            println!("g[{mu}] =");
            for i in 0..d {
                let row: Vec<String> = (0..d)
                    .map(|j| format!("{:+.6}{:+.6}i", g[(i, j)].re, g[(i, j)].im))
                    .collect();
                println!("  [{}]", row.join(", "));
            }
        }
    }
    if let Some(csv) = &common.csv {
        let rows: Vec<Vec<String>> = basis
            .generators()
            .iter()
            .enumerate()
            .flat_map(|(mu, g)| {
                (0..d).flat_map(move |i| {
                    (0..d).map(move |j| {
                        vec![
                            mu.to_string(),
                            i.to_string(),
                            j.to_string(),
                            sig12(g[(i, j)].re),
                            sig12(g[(i, j)].im),
                        ]
                    })
                })
            })
            .collect();
        write_csv(csv, &["generator", "row", "col", "re", "im"], &rows)?;
    }
    Ok(())
}

fn cmd_error(common: &CommonArgs) -> Result<(), CliError> {
    let (parsed, problem) = load(common)?;
    if !preamble(common, &parsed)? {
        return Ok(());
    }
    let rho = require(&problem.state, "state")?;
    let x = require(&problem.x, "observable_x")?;
    let m = require(&problem.measurement, "measurement")?;
    let value = measurement_error(rho, x, m, &problem.basis)?;
    let povm = povm_from_kraus(m, &problem.basis)?;
    let j = classical_fisher(rho, &povm)?;
    let off_support = !value.is_finite();
    if common.json {
        let doc = serde_json::json!({
            "error": value,
            "fisher_rank": j.rank(),
            "fisher_size": j.size(),
            "off_support": off_support,
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        println!("error: {}", ext12(&value));
        println!("fisher rank: {} / {}", j.rank(), j.size());
        println!("off support: {off_support}");
    }
    if let Some(csv) = &common.csv {
        write_csv(
            csv,
            &["error", "fisher_rank", "fisher_size", "off_support"],
            &[vec![
                ext12(&value),
                j.rank().to_string(),
                j.size().to_string(),
                off_support.to_string(),
            ]],
        )?;
    }
    Ok(())
}

fn cmd_disturb(common: &CommonArgs) -> Result<(), CliError> {
    let (parsed, problem) = load(common)?;
    if !preamble(common, &parsed)? {
        return Ok(());
    }
    let rho = require(&problem.state, "state")?;
    let y = require(&problem.y, "observable_y")?;
    let m = require(&problem.measurement, "measurement")?;
    let value = disturbance(rho, y, m, &problem.basis)?;
    let family = StateFamily::pushforward(rho, m, &problem.basis)?;
    let js = sld_fisher(&family)?;
    let off_support = !value.is_finite();
    if common.json {
        let doc = serde_json::json!({
            "disturbance": value,
            "pushforward_sld_rank": js.rank(),
            "fisher_size": js.size(),
            "off_support": off_support,
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        println!("disturbance: {}", ext12(&value));
        println!("pushforward SLD rank: {} / {}", js.rank(), js.size());
        println!("off support: {off_support}");
    }
    if let Some(csv) = &common.csv {
        write_csv(
            csv,
            &["disturbance", "pushforward_sld_rank", "fisher_size", "off_support"],
            &[vec![
                ext12(&value),
                js.rank().to_string(),
                js.size().to_string(),
                off_support.to_string(),
            ]],
        )?;
    }
    Ok(())
}

fn cmd_tradeoff(common: &CommonArgs) -> Result<(), CliError> {
    let (parsed, problem) = load(common)?;
    if !preamble(common, &parsed)? {
        return Ok(());
    }
    let rho = require(&problem.state, "state")?;
    let x = require(&problem.x, "observable_x")?;
    let y = require(&problem.y, "observable_y")?;
    let m = require(&problem.measurement, "measurement")?;
    let report = tradeoff_report(rho, x, y, m, &problem.basis)?;
    if common.json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!("error:            {}", ext12(&report.error));
        println!("disturbance:      {}", ext12(&report.disturbance));
        println!("product:          {}", ext12(&report.product));
        println!("heisenberg bound: {}", sig12(report.heisenberg_bound));
        println!("attainable bound: {}", sig12(report.attainable_bound));
        println!("heisenberg satisfied: {}", report.heisenberg_satisfied);
        println!("attainable satisfied: {}", report.attainable_satisfied);
    }
    if let Some(csv) = &common.csv {
        write_csv(
            csv,
            &[
                "error",
                "disturbance",
                "product",
                "heisenberg_bound",
                "attainable_bound",
                "heisenberg_satisfied",
                "attainable_satisfied",
            ],
            &[vec![
                ext12(&report.error),
                ext12(&report.disturbance),
                ext12(&report.product),
                sig12(report.heisenberg_bound),
                sig12(report.attainable_bound),
                report.heisenberg_satisfied.to_string(),
                report.attainable_satisfied.to_string(),
            ]],
        )?;
    }
    Ok(())
}

fn cmd_optimal(common: &CommonArgs) -> Result<(), CliError> {
    let (parsed, problem) = load(common)?;
    if !preamble(common, &parsed)? {
        return Ok(());
    }
    let rho = require(&problem.state, "state")?;
    let x = require(&problem.x, "observable_x")?;
    let y = require(&problem.y, "observable_y")?;
    let grid: Vec<f64> = match problem.params.w1 {
        Some(w1) => vec![w1],
        None => {
            let n = problem.params.grid.max(1);
            (0..n).map(|k| (k + 1) as f64 / (n + 1) as f64).collect()
        }
    };
    let points = attainability_sweep(rho, x, y, &grid, &problem.basis)?;
    if points.iter().all(|p| p.construction_error.is_some()) {
        let detail = points[0]
            .construction_error
            .clone()
            .unwrap_or_else(|| "construction failed".to_string());
        return Err(CliError::Numerical(detail));
    }
    if common.json {
        let doc = serde_json::json!({
            "points": points,
            "min_gap": min_gap(&points),
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    } else {
        println!("w1,error,disturbance,product,bound,gap");
        for p in &points {
            println!(
                "{},{},{},{},{},{}",
                sig12(p.w1),
                opt_ext12(&p.error),
                opt_ext12(&p.disturbance),
                opt_ext12(&p.product),
                sig12(p.bound),
                p.gap.map(sig12).unwrap_or_default()
            );
        }
        if let Some(g) = min_gap(&points) {
            println!("min gap: {}", sig12(g));
        }
    }
    if let Some(csv) = &common.csv {
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                vec![
                    sig12(p.w1),
                    opt_ext12(&p.error),
                    opt_ext12(&p.disturbance),
                    opt_ext12(&p.product),
                    sig12(p.bound),
                    p.gap.map(sig12).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(
            csv,
            &["w1", "error", "disturbance", "product", "bound", "gap"],
            &rows,
        )?;
    }
    Ok(())
}

fn cmd_sweep(common: &CommonArgs, dim: Option<usize>) -> Result<(), CliError> {
    let (d, samples, seed) = if common.spec.is_some() {
        let (parsed, problem) = load(common)?;
        if !preamble(common, &parsed)? {
            return Ok(());
        }
        (
            dim.unwrap_or(parsed.dim),
            problem.params.samples,
            problem.params.seed,
        )
    } else {
        if let Some(n) = common.threads {
            qestim::configure_threads(n);
        }
        let d = dim.ok_or_else(|| CliError::Validation("need --dim or --spec".to_string()))?;
        (d, 1000, common.seed.unwrap_or(0))
    };
    let report = random_vindication_sweep(d, samples, seed)?;
    if common.json {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!("dim: {}, samples: {}, seed: {}", report.dim, report.samples, report.seed);
        println!("heisenberg violations: {}", report.heisenberg_violations);
        println!("attainable violations: {}", report.attainable_violations);
        println!(
            "worst heisenberg margin: {}",
            sig12(report.worst_heisenberg_margin)
        );
        println!(
            "worst attainable margin: {}",
            sig12(report.worst_attainable_margin)
        );
    }
    if let Some(csv) = &common.csv {
        write_csv(
            csv,
            &[
                "dim",
                "samples",
                "seed",
                "heisenberg_violations",
                "attainable_violations",
                "worst_heisenberg_margin",
                "worst_attainable_margin",
            ],
            &[vec![
                report.dim.to_string(),
                report.samples.to_string(),
                report.seed.to_string(),
                report.heisenberg_violations.to_string(),
                report.attainable_violations.to_string(),
                sig12(report.worst_heisenberg_margin),
                sig12(report.worst_attainable_margin),
            ]],
        )?;
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), CliError> {
    let (parsed, problem) = load(common)?;
    if !preamble(common, &parsed)? {
        return Ok(());
    }
    let rho = require(&problem.state, "state")?;
    let m = require(&problem.measurement, "measurement")?;
    let cfg = RunConfig {
        shots: problem.params.n,
        trials: problem.params.trials,
        seed: problem.params.seed,
    };
    // with a second measurement the run estimates <Y> after the first
    // measurement disturbed the state; otherwise it estimates <X> directly
    let run = if let Some(n_meas) = &problem.measurement_n {
        let y = require(&problem.y, "observable_y")?;
        disturbance_scaling_experiment(rho, m, n_meas, y, &cfg, &problem.basis)?
    } else {
        let x = require(&problem.x, "observable_x")?;
        variance_scaling_experiment(rho, m, x, &cfg, problem.params.estimator, &problem.basis)?
    };
    if common.json {
        println!("{}", serde_json::to_string_pretty(&run).unwrap());
    } else {
        println!("estimator: {:?}", run.estimator);
        println!("shots: {}, trials: {}, seed: {}", run.shots, run.trials, run.seed);
        println!("mean: {} (truth {})", sig12(run.mean), sig12(run.expectation));
        println!(
            "n * variance: {} +- {}",
            sig12(run.n_variance),
            sig12(run.n_variance_std_error)
        );
        println!("cramer-rao value: {}", sig12(run.cramer_rao));
        println!("unconverged trials: {}", run.unconverged_trials);
    }
    if let Some(csv) = &common.csv {
        write_csv(
            csv,
            &[
                "estimator",
                "shots",
                "trials",
                "seed",
                "mean",
                "mean_std_error",
                "n_variance",
                "n_variance_std_error",
                "cramer_rao",
                "expectation",
                "unconverged_trials",
            ],
            &[vec![
                format!("{:?}", run.estimator).to_lowercase(),
                run.shots.to_string(),
                run.trials.to_string(),
                run.seed.to_string(),
                sig12(run.mean),
                sig12(run.mean_std_error),
                sig12(run.n_variance),
                sig12(run.n_variance_std_error),
                sig12(run.cramer_rao),
                sig12(run.expectation),
                run.unconverged_trials.to_string(),
            ]],
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Basis { common, dim } => cmd_basis(common, *dim),
        Command::Error { common } => cmd_error(common),
        Command::Disturb { common } => cmd_disturb(common),
        Command::Tradeoff { common } => cmd_tradeoff(common),
        Command::Optimal { common } => cmd_optimal(common),
        Command::Sweep { common, dim } => cmd_sweep(common, *dim),
        Command::Simulate { common } => cmd_simulate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
