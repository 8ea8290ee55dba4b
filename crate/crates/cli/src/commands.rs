use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use amp_core::{AmpConfig, Mat, SparseProblem};
use amp_harness::experiment::{self, ExperimentResult, TableSpec};
use amp_harness::images::{self, ImageSpec, IMAGE_LAMBDA};
use amp_harness::metrics::evaluate;
use amp_harness::solvers::{parse_solver_list, solve, SolverKind, SolverSettings};
use amp_harness::synth::{gen_problem, Penalty, RhoPolicy, SynthSpec};
use amp_harness::{idx, HarnessError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::args::{BenchArgs, ImageArgs, OracleArgs, OutputArgs, PenaltyArgs, RecoverArgs, SweepArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// Errors that stem from the invocation rather than from a solve.
pub fn is_usage(e: &HarnessError) -> bool {
    matches!(e, HarnessError::InvalidSpec(_) | HarnessError::UnknownSolver(_))
}

fn penalty(args: &PenaltyArgs, default_lambda: f64) -> Result<Penalty, CliError> {
    let lambda = args.lambda.unwrap_or(default_lambda);
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CliError::Usage(format!("--lambda must be positive, got {lambda}")));
    }
    let rho = match args.rho {
        Some(r) => RhoPolicy::Uniform(r),
        None if args.kappa > 0.0 && args.kappa < 1.0 => RhoPolicy::Prior { kappa: args.kappa },
        None => return Err(CliError::Usage(format!("--kappa must lie in (0, 1), got {}", args.kappa))),
    };
    Ok(Penalty { lambda, rho })
}

fn settings(args: &PenaltyArgs) -> Result<SolverSettings, CliError> {
    if args.max_iter == Some(0) {
        return Err(CliError::Usage("--max-iter must be at least 1".into()));
    }
    Ok(SolverSettings {
        amp: AmpConfig { max_iter: args.max_iter, ..AmpConfig::default() },
        fista_l1: args.fista_l1,
        ..SolverSettings::default()
    })
}

fn solvers(list: &str) -> Result<Vec<SolverKind>, CliError> {
    Ok(parse_solver_list(list)?)
}

/// `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("--k: expected start:stop:step or a comma list, got `{s}`"));
    let ks: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let (start, stop, step) = match parts[..] {
            [a, b] => (a, b, 1),
            [a, b, c] => (a, b, c),
            _ => return Err(bad()),
        };
        if step == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ks.is_empty() {
        return Err(bad());
    }
    Ok(ks)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_err(path: &Path, e: HarnessError) -> CliError {
    match e {
        HarnessError::Io(source) => CliError::Io { path: path.display().to_string(), source },
        other => CliError::Harness(other),
    }
}

fn emit(result: &ExperimentResult, out: &OutputArgs) -> Result<ExitCode, CliError> {
    match &out.out {
        Some(path) => {
            let mut w = create(path)?;
            result.write_csv(&mut w, !out.no_timing).map_err(|e| write_err(path, e))?;
            w.flush().map_err(|e| write_err(path, e.into()))?;
        }
        None => result.write_csv(io::stdout().lock(), !out.no_timing).map_err(|e| write_err(Path::new("<stdout>"), e))?,
    }
    if let Some(path) = &out.report {
        let mut w = create(path)?;
        result.write_json(&mut w).map_err(|e| write_err(path, e))?;
        w.flush().map_err(|e| write_err(path, e.into()))?;
    }
    summarize(result);
    let failed: Vec<_> = result.rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("trial {} {}: {}", r.trial, r.solver, r.error.as_deref().unwrap_or_default());
    }
    Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Aggregate table on standard error, so standard output stays pure CSV.
fn summarize(result: &ExperimentResult) {
    eprintln!("{:<8} {:>5} {:>10} {:>11} {:>11} {:>8}", "solver", "k", "time_s", "mse", "cost", "sm");
    for a in &result.aggregates {
        eprintln!(
            "{:<8} {:>5} {:>10.4} {:>11.3e} {:>11.3e} {:>8.2}",
            a.solver.name(),
            a.k.map_or("-".to_string(), |k| k.to_string()),
            a.time_s,
            a.mse,
            a.cost,
            a.sm
        );
    }
}

pub fn bench(a: &BenchArgs) -> Result<ExitCode, CliError> {
    let spec = TableSpec {
        synth: SynthSpec { p: a.p, q: a.q, k: a.k, sigma: a.sigma, seed: a.seed, nonneg: a.penalty.nonneg },
        trials: a.trials,
        penalty: penalty(&a.penalty, Penalty::default().lambda)?,
    };
    let result = experiment::run_table(&spec, &solvers(&a.solvers)?, &settings(&a.penalty)?, a.output.threads)?;
    emit(&result, &a.output)
}

pub fn sweep(a: &SweepArgs) -> Result<ExitCode, CliError> {
    let ks = parse_k_range(&a.k)?;
    let tpl = SynthSpec { p: a.p, q: a.q, k: ks[0], sigma: a.sigma, seed: a.seed, nonneg: a.penalty.nonneg };
    let pen = penalty(&a.penalty, Penalty::default().lambda)?;
    let result = experiment::run_sweep(&tpl, &ks, a.trials, &pen, &solvers(&a.solvers)?, &settings(&a.penalty)?, a.output.threads)?;
    emit(&result, &a.output)
}

pub fn image(a: &ImageArgs) -> Result<ExitCode, CliError> {
    let set = match &a.idx_images {
        Some(path) => idx::read_idx(path, a.idx_labels.as_deref(), Some(a.idx_limit)).map_err(HarnessError::from)?,
        None if a.idx_labels.is_some() => return Err(CliError::Usage("--idx-labels needs --idx-images".into())),
        None => images::synthetic_digits(a.idx_limit, a.seed),
    };
    // Image recovery is always constrained; --nonneg is implied.
    let spec = ImageSpec { q: a.measurements, sigma: a.sigma, seed: a.seed, penalty: penalty(&a.penalty, IMAGE_LAMBDA)? };
    let result =
        images::run_image_recovery(&set, &spec, &solvers(&a.solvers)?, &settings(&a.penalty)?, a.output.threads, a.dump_dir.as_deref())?;
    emit(&result, &a.output)
}

pub fn oracle_check(a: &OracleArgs) -> Result<ExitCode, CliError> {
    let tpl = SynthSpec { p: a.p, q: a.q, k: 1, sigma: a.sigma, seed: a.seed, nonneg: a.penalty.nonneg };
    let pen = penalty(&a.penalty, Penalty::default().lambda)?;
    let cfg = settings(&a.penalty)?.amp;
    let check = experiment::oracle_check(&tpl, a.k, a.trials, &pen, &cfg, a.threads)?;
    println!("trials            {}", check.trials);
    println!("exact optimum     {} ({:.1}%)", check.exact, 100.0 * check.exact_fraction());
    println!("median rel. gap   {:.3e}", check.median_rel_gap());
    println!("max rel. gap      {:.3e}", check.max_rel_gap());
    println!("below optimum     {}", check.violations);
    if check.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("AMP reported a cost below the exhaustive optimum in {} trial(s)", check.violations);
        Ok(ExitCode::from(1))
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RhoInput {
    Uniform(f64),
    PerIndex(Vec<f64>),
}

#[derive(Debug, Deserialize)]
struct ProblemInput {
    /// Row-major measurement matrix; columns need not be normalized.
    a: Vec<Vec<f64>>,
    y: Vec<f64>,
    lambda: Option<f64>,
    rho: Option<RhoInput>,
    nonneg: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Recovered {
    solver: SolverKind,
    /// Coefficients in the scale of the input columns.
    x: Vec<f64>,
    support: Vec<usize>,
    cost: f64,
    time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination: Option<amp_core::Termination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sm: Option<f64>,
}

fn load_problem(path: &Path, args: &PenaltyArgs) -> Result<(SparseProblem, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let input: ProblemInput =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    let a = Mat::from_rows(&input.a).map_err(|e| CliError::Usage(format!("{}: matrix `a`: {e}", path.display())))?;
    let p = a.cols();
    let lambda = args.lambda.or(input.lambda).unwrap_or(Penalty::default().lambda);
    let rho = match (args.rho, input.rho) {
        (Some(r), _) | (None, Some(RhoInput::Uniform(r))) => vec![r; p],
        (None, Some(RhoInput::PerIndex(v))) => v,
        (None, None) => return Err(CliError::Usage(format!("{}: no `rho` given; pass --rho", path.display()))),
    };
    let nonneg = args.nonneg || input.nonneg.unwrap_or(false);
    SparseProblem::from_raw(a, input.y, lambda, rho, nonneg)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn recover(a: &RecoverArgs) -> Result<ExitCode, CliError> {
    let kinds = solvers(&a.solvers)?;
    let settings = settings(&a.penalty)?;
    let (prob, scales, x0, k, sigma) = match &a.input {
        Some(path) => {
            let (prob, scales) = load_problem(path, &a.penalty)?;
            (prob, scales, None, a.k, a.sigma)
        }
        None => {
            let spec = SynthSpec { p: a.p, q: a.q, k: a.k, sigma: a.sigma, seed: a.seed, nonneg: a.penalty.nonneg };
            let inst = gen_problem(&spec, 0, &penalty(&a.penalty, Penalty::default().lambda)?)?;
            let p = inst.problem.p();
            (inst.problem, vec![1.0; p], Some(inst.x0), a.k, a.sigma)
        }
    };
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let res = solve(kind, &prob, k, sigma, &settings)?;
        let m = x0.as_ref().map(|x0| evaluate(&res.solution, x0));
        out.push(Recovered {
            solver: kind,
            x: res.solution.x.iter().zip(&scales).map(|(x, s)| x / s).collect(),
            support: res.solution.support(),
            cost: res.solution.cost,
            time_s: res.elapsed.as_secs_f64(),
            iterations: res.report.as_ref().map(|r| r.iterations),
            termination: res.report.as_ref().map(|r| r.termination),
            mse: m.map(|m| m.mse),
            sm: m.map(|m| m.sm),
        });
    }
    let json = serde_json::to_string_pretty(&out).expect("plain data serializes");
    match &a.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|source| CliError::Io { path: path.display().to_string(), source })?,
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}
