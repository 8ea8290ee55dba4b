//! Table, sweep and oracle-check drivers plus CSV/JSON persistence.

use std::io::Write;

use amp_core::baselines::brute_force;
use amp_core::{amp, AmpConfig, Solution, SolverReport};
use serde::{Deserialize, Serialize};

use crate::metrics::{evaluate, Metrics};
use crate::solvers::{solve, SolverKind, SolverSettings};
use crate::synth::{gen_problem, Instance, Penalty, SynthSpec};
use crate::{par_map, HarnessError};

/// One solver on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub solver: SolverKind,
    pub trial: usize,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub sigma: f64,
    pub time_s: f64,
    /// `None` when the solver failed on this trial; see `error`.
    pub metrics: Option<Metrics>,
    /// Smallest emitted coefficient, for auditing non-negative runs.
    pub min_x: Option<f64>,
    pub error: Option<String>,
    pub converged: bool,
}

/// Means over the successful trials of one solver (and one `k` when the
/// experiment varies it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub solver: SolverKind,
    pub k: Option<usize>,
    pub p: usize,
    pub q: usize,
    pub sigma: f64,
    pub time_s: f64,
    pub mse: f64,
    pub cost: f64,
    pub sm: f64,
    pub trials: usize,
    pub failed: usize,
}

/// AMP report kept for the JSON dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpRun {
    pub trial: usize,
    pub k: usize,
    pub report: SolverReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
    pub amp_runs: Vec<AmpRun>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl ExperimentResult {
    /// Builds the aggregate rows. Groups are keyed by solver, and by `k` when
    /// `group_by_k`; they appear in first-seen order.
    pub fn from_rows(experiment: &str, rows: Vec<TrialRow>, amp_runs: Vec<AmpRun>, group_by_k: bool) -> Self {
        let mut keys: Vec<(SolverKind, Option<usize>)> = Vec::new();
        for r in &rows {
            let key = (r.solver, group_by_k.then_some(r.k));
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let aggregates = keys
            .into_iter()
            .map(|(solver, k)| {
                let group: Vec<&TrialRow> =
                    rows.iter().filter(|r| r.solver == solver && (k.is_none() || Some(r.k) == k)).collect();
                let ok: Vec<&Metrics> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
                let first = group[0];
                AggregateRow {
                    solver,
                    k,
                    p: first.p,
                    q: first.q,
                    sigma: first.sigma,
                    time_s: mean(group.iter().filter(|r| r.metrics.is_some()).map(|r| r.time_s)),
                    mse: mean(ok.iter().map(|m| m.mse)),
                    cost: mean(ok.iter().map(|m| m.cost)),
                    sm: mean(ok.iter().map(|m| m.sm)),
                    trials: ok.len(),
                    failed: group.len() - ok.len(),
                }
            })
            .collect();
        ExperimentResult { experiment: experiment.to_string(), rows, aggregates, amp_runs }
    }

    pub fn aggregate(&self, solver: SolverKind, k: Option<usize>) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.solver == solver && a.k == k)
    }

    /// Writes trial rows followed by aggregate rows (`trial = mean`).
    ///
    /// With `timing = false` the `time_s` column is left empty, which makes
    /// the output a pure function of the invocation.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "solver", "trial", "k", "p", "q", "sigma", "time_s", "mse", "cost", "sm"])?;
        let num = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        let time = |v: f64| if timing { num(v) } else { String::new() };
        for r in &self.rows {
            let (mse, cost, sm) = r.metrics.map_or((String::new(), String::new(), String::new()), |m| (num(m.mse), num(m.cost), num(m.sm)));
            w.write_record([
                self.experiment.clone(),
                r.solver.to_string(),
                r.trial.to_string(),
                r.k.to_string(),
                r.p.to_string(),
                r.q.to_string(),
                r.sigma.to_string(),
                time(r.time_s),
                mse,
                cost,
                sm,
            ])?;
        }
        for a in &self.aggregates {
            w.write_record([
                self.experiment.clone(),
                a.solver.to_string(),
                "mean".to_string(),
                a.k.map_or(String::new(), |k| k.to_string()),
                a.p.to_string(),
                a.q.to_string(),
                a.sigma.to_string(),
                time(a.time_s),
                num(a.mse),
                num(a.cost),
                num(a.sm),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Full result, AMP reports included, as pretty JSON.
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Runs every solver on `inst`; returns the rows, the AMP report, and the
/// successful solutions.
pub(crate) fn run_solvers(
    inst: &Instance,
    trial: usize,
    k: usize,
    sigma: f64,
    solvers: &[SolverKind],
    settings: &SolverSettings,
) -> (Vec<TrialRow>, Option<AmpRun>, Vec<(SolverKind, Solution)>) {
    let prob = &inst.problem;
    let mut rows = Vec::with_capacity(solvers.len());
    let mut amp_run = None;
    let mut solutions = Vec::new();
    for &solver in solvers {
        let mut row = TrialRow {
            solver,
            trial,
            k,
            p: prob.p(),
            q: prob.q(),
            sigma,
            time_s: 0.0,
            metrics: None,
            min_x: None,
            error: None,
            converged: false,
        };
        match solve(solver, prob, k, sigma, settings) {
            Ok(out) => {
                row.time_s = out.elapsed.as_secs_f64();
                row.metrics = Some(evaluate(&out.solution, &inst.x0));
                row.min_x = out.solution.x.iter().copied().reduce(f64::min);
                row.converged = out.converged;
                if let Some(report) = out.report {
                    amp_run = Some(AmpRun { trial, k, report });
                }
                solutions.push((solver, out.solution));
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    (rows, amp_run, solutions)
}

/// Repeated trials of one synthetic regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub synth: SynthSpec,
    pub trials: usize,
    pub penalty: Penalty,
}

/// Averages over `trials` fresh instances. Trial `t` draws from stream `t`
/// of the seed. Solver failures are recorded on their row and the run goes on.
pub fn run_table(spec: &TableSpec, solvers: &[SolverKind], settings: &SolverSettings, threads: usize) -> Result<ExperimentResult, HarnessError> {
    if spec.trials == 0 {
        return Err(HarnessError::InvalidSpec("trials must be at least 1".into()));
    }
    spec.synth.validate()?;
    let per_trial = par_map(threads, spec.trials, |t| -> Result<_, HarnessError> {
        let inst = gen_problem(&spec.synth, t as u64, &spec.penalty)?;
        let (rows, amp, _) = run_solvers(&inst, t, spec.synth.k, spec.synth.sigma, solvers, settings);
        Ok((rows, amp))
    })?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for r in per_trial {
        let (r, a) = r?;
        rows.extend(r);
        runs.extend(a);
    }
    Ok(ExperimentResult::from_rows("table", rows, runs, false))
}

/// Stream for trial `t` at sparsity `k`: the same `(seed, k, t)` always gives
/// the same instance, whatever else the sweep contains.
pub fn sweep_stream(k: usize, trial: usize) -> u64 {
    ((k as u64) << 32) | trial as u64
}

/// One block of `trials` per sparsity level in `ks`.
pub fn run_sweep(
    template: &SynthSpec,
    ks: &[usize],
    trials: usize,
    penalty: &Penalty,
    solvers: &[SolverKind],
    settings: &SolverSettings,
    threads: usize,
) -> Result<ExperimentResult, HarnessError> {
    if ks.is_empty() || trials == 0 {
        return Err(HarnessError::InvalidSpec("sweep needs at least one k and one trial".into()));
    }
    for &k in ks {
        SynthSpec { k, ..*template }.validate()?;
    }
    let jobs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..trials).map(move |t| (k, t))).collect();
    let per_job = par_map(threads, jobs.len(), |j| -> Result<_, HarnessError> {
        let (k, t) = jobs[j];
        let spec = SynthSpec { k, ..*template };
        let inst = gen_problem(&spec, sweep_stream(k, t), penalty)?;
        let (rows, amp, _) = run_solvers(&inst, t, k, spec.sigma, solvers, settings);
        Ok((rows, amp))
    })?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for r in per_job {
        let (r, a) = r?;
        rows.extend(r);
        runs.extend(a);
    }
    Ok(ExperimentResult::from_rows("sweep", rows, runs, true))
}

/// AMP against the exhaustive optimum on small instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub trials: usize,
    /// Trials where AMP reported a cost below the global optimum (a bug).
    pub violations: usize,
    /// Trials where AMP matched the optimum.
    pub exact: usize,
    /// `(amp - opt) / max(|opt|, tiny)` per trial.
    pub rel_gaps: Vec<f64>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn exact_fraction(&self) -> f64 {
        self.exact as f64 / self.trials.max(1) as f64
    }

    pub fn median_rel_gap(&self) -> f64 {
        let mut g = self.rel_gaps.clone();
        g.sort_by(f64::total_cmp);
        match g.len() {
            0 => 0.0,
            n if n % 2 == 1 => g[n / 2],
            n => 0.5 * (g[n / 2 - 1] + g[n / 2]),
        }
    }

    pub fn max_rel_gap(&self) -> f64 {
        self.rel_gaps.iter().copied().fold(0.0, f64::max)
    }
}

/// Trial `t` plants `1 + t % k_max` nonzeros.
pub fn oracle_check(
    template: &SynthSpec,
    k_max: usize,
    trials: usize,
    penalty: &Penalty,
    amp_cfg: &AmpConfig,
    threads: usize,
) -> Result<OracleCheck, HarnessError> {
    if k_max == 0 || trials == 0 {
        return Err(HarnessError::InvalidSpec("oracle check needs k_max >= 1 and trials >= 1".into()));
    }
    let per_trial = par_map(threads, trials, |t| -> Result<(f64, f64), HarnessError> {
        let spec = SynthSpec { k: (1 + t % k_max).min(template.p), ..*template };
        let inst = gen_problem(&spec, t as u64, penalty)?;
        let opt = brute_force(&inst.problem, None)?.cost;
        let got = amp(&inst.problem, amp_cfg)?.solution.cost;
        Ok((opt, got))
    })?;
    let mut check = OracleCheck { trials, violations: 0, exact: 0, rel_gaps: Vec::with_capacity(trials) };
    for r in per_trial {
        let (opt, got) = r?;
        let scale = 1.0 + opt.abs();
        if got < opt - 1e-12 * scale {
            check.violations += 1;
        }
        if got - opt <= 1e-9 * scale {
            check.exact += 1;
        }
        check.rel_gaps.push(((got - opt) / opt.abs().max(1e-300)).max(0.0));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(solver: SolverKind, trial: usize, k: usize, mse: Option<f64>) -> TrialRow {
        TrialRow {
            solver,
            trial,
            k,
            p: 4,
            q: 2,
            sigma: 0.1,
            time_s: 1.0,
            metrics: mse.map(|m| Metrics { mse: m, cost: 2.0 * m, sm: 50.0 }),
            min_x: None,
            error: mse.is_none().then(|| "boom".to_string()),
            converged: true,
        }
    }

    #[test]
    fn aggregates_skip_failed_rows() {
        let rows = vec![
            row(SolverKind::Amp, 0, 3, Some(1.0)),
            row(SolverKind::Omp, 0, 3, None),
            row(SolverKind::Amp, 1, 3, Some(3.0)),
            row(SolverKind::Omp, 1, 3, Some(5.0)),
        ];
        let res = ExperimentResult::from_rows("table", rows, Vec::new(), false);
        let a = res.aggregate(SolverKind::Amp, None).unwrap();
        assert_eq!((a.mse, a.cost, a.trials, a.failed), (2.0, 4.0, 2, 0));
        let o = res.aggregate(SolverKind::Omp, None).unwrap();
        assert_eq!((o.mse, o.trials, o.failed), (5.0, 1, 1));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![row(SolverKind::Amp, 0, 3, Some(0.5)), row(SolverKind::Fista, 0, 3, None)];
        let res = ExperimentResult::from_rows("table", rows, Vec::new(), true);
        let mut buf = Vec::new();
        res.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,solver,trial,k,p,q,sigma,time_s,mse,cost,sm");
        assert_eq!(lines[1], "table,amp,0,3,4,2,0.1,,0.5,1,50");
        assert_eq!(lines[2], "table,fista,0,3,4,2,0.1,,,,");
        assert_eq!(lines[3], "table,amp,mean,3,4,2,0.1,,0.5,1,50");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn median_gap() {
        let c = OracleCheck { trials: 4, violations: 0, exact: 2, rel_gaps: vec![0.0, 0.3, 0.0, 0.1] };
        assert_eq!(c.median_rel_gap(), 0.05);
        assert_eq!(c.exact_fraction(), 0.5);
        assert_eq!(c.max_rel_gap(), 0.3);
    }

    #[test]
    fn sweep_streams_are_distinct() {
        assert_ne!(sweep_stream(10, 1), sweep_stream(11, 1));
        assert_ne!(sweep_stream(10, 1), sweep_stream(10, 2));
    }
}
