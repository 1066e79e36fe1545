//! The `run` command: seeded trial batches, per-trial CSV series and a
//! summary across trials.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use gameda::analysis::{hessian_curvature_bound, nash_oracle, supplied_candidate, Tolerances};
use gameda::engine::{self, gap_ergodic_bound, length_bound, Checkpoint, RunConfig, Trajectory};
use gameda::games::{BilinearZeroSum, Cournot, Game, NonConcaveStable};
use gameda::regularizer::ProductRegularizer;

use crate::config::{CandidateSpec, ExperimentConfig, GameSpec, Modulus};
use crate::document::parse_game_document;
use crate::CliError;

pub const TRIAL_HEADER: &str =
    "trial,n,gamma_n,gap,fenchel,distance,length,ergodic_gap,bound_gap_ergodic,bound_length";
pub const SUMMARY_HEADER: &str = "n,metric,trials,mean,std_error,median,q10,q90,bound";
pub const METRICS: [&str; 5] = ["gap", "fenchel", "distance", "length", "ergodic_gap"];

/// Seventeen significant digits: lossless for `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn build_game(spec: &GameSpec) -> Result<Box<dyn Game<f64>>, CliError> {
    Ok(match spec {
        GameSpec::Cournot { firms, a, b, c, capacity } => Box::new(Cournot::new(
            *a,
            b.expand(*firms, "game.b")?,
            c.expand(*firms, "game.c")?,
            capacity.expand(*firms, "game.capacity")?,
        )?),
        GameSpec::MatchingPennies => Box::new(BilinearZeroSum::matching_pennies()),
        GameSpec::Bilinear { matrix } => Box::new(BilinearZeroSum::matrix_game(matrix.clone())?),
        GameSpec::NonConcave { dim } => Box::new(NonConcaveStable::new(*dim)?),
        GameSpec::Document { path } => parse_game_document(path).map_err(CliError::Config)?.into_game(),
    })
}

/// Problem constants the theoretical bounds are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    /// Strong convexity modulus of the aggregate penalty.
    pub k: f64,
    /// Penalty range `max h - min h`.
    pub omega: f64,
    /// Root-mean-square bound on the feedback.
    pub v_star: f64,
    /// Fenchel coupling between the candidate set and `Y_1`.
    pub f1: Option<f64>,
    /// Strong-stability modulus.
    pub l: Option<f64>,
    pub gamma_square_sum_inf: Option<f64>,
    pub epsilon: Option<f64>,
}

impl Constants {
    pub fn gap_bound(&self, gamma_sum: f64, gamma_square_sum: f64) -> Option<f64> {
        self.f1.map(|f1| gap_ergodic_bound(f1, self.v_star, self.k, gamma_sum, gamma_square_sum))
    }

    pub fn length_bound(&self) -> Option<f64> {
        Some(length_bound(self.v_star, self.k, self.l?, self.f1?, self.gamma_square_sum_inf?, self.epsilon?))
    }
}

/// Everything a batch needs, resolved before any trial starts.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub game: Box<dyn Game<f64>>,
    pub reg: ProductRegularizer<f64>,
    pub run: RunConfig<f64>,
    pub constants: Constants,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;
        let game = build_game(&config.game)?;
        let space = game.action_space().clone();
        let kinds = config.regularizer.expand(space.players())?;
        let reg = ProductRegularizer::new(space, &kinds)?;
        let noise = config.noise.model();
        if noise.requires_pure_payoffs() && game.pure_payoff_vectors(&vec![0; game.players()]).is_none() {
            return Err(CliError::Config("noise.kind = action-sampling needs a finite game".into()));
        }

        let metrics = config.run.metric_set();
        let needs_candidates =
            metrics.needs_candidates() || config.bounds.epsilon.is_some() || config.bounds.strong_stability.is_some();
        let candidates = if needs_candidates { vec![resolve_candidate(&config.candidate, game.as_ref())?] } else { vec![] };

        let k = reg.strong_convexity();
        let omega = reg.range();
        let v_star = game.gradient_bound(noise.sigma());
        let policy = config.step.resolve(config.run.horizon, k, omega, v_star);
        policy.validate()?;
        let init = config.run.init.init();
        let y1 = init.resolve(&reg)?;
        let f1 = if candidates.is_empty() { None } else { Some(reg.fenchel_set(&candidates, &y1)?) };
        let l = match &config.bounds.strong_stability {
            None => None,
            Some(Modulus::Value(l)) => Some(*l),
            Some(Modulus::Source(_)) => {
                let l = hessian_curvature_bound(game.as_ref(), &candidates[0])?;
                if !(l > 0.0) {
                    return Err(CliError::Config(format!(
                        "bounds.strong_stability = \"hessian\": the Hessian is not negative definite (lambda_max = {})",
                        -l
                    )));
                }
                Some(l)
            }
        };
        let constants = Constants {
            k,
            omega,
            v_star,
            f1,
            l,
            gamma_square_sum_inf: policy.square_sum_infinite(),
            epsilon: config.bounds.epsilon,
        };

        let mut run = RunConfig::new(config.run.horizon, policy, noise);
        run.init = init;
        run.candidates = candidates;
        run.metrics = metrics;
        run.checkpoint_stride = config.run.checkpoint_stride();
        run.watch_radius = config.bounds.epsilon;
        run.stop_on_hit = config.bounds.stop_at_epsilon;
        run.validate()?;
        Ok(Self { config, game, reg, run, constants })
    }

    pub fn trial(&self, trial: usize) -> Result<Trajectory<f64>, CliError> {
        let mut rng = engine::trial_rng(self.config.run.seed, trial as u64);
        engine::run(self.game.as_ref(), &self.reg, &self.run, &mut rng).map_err(|e| match e {
            gameda::Error::NumericAbort { n, detail } => {
                CliError::Numeric(format!("trial {trial} aborted at step {n}: {detail}"))
            }
            other => CliError::from(other),
        })
    }

    /// Ergodic-gap bound for a row, from the step policy alone.
    fn row_gap_bound(&self, c: &Checkpoint<f64>) -> Option<f64> {
        if !self.run.metrics.ergodic_gap {
            return None;
        }
        let p = &self.run.policy;
        self.constants.gap_bound(p.sum(c.n), p.square_sum(c.n))
    }

    pub fn trial_csv(&self, trial: usize, traj: &Trajectory<f64>) -> String {
        let m = &self.run.metrics;
        let bound_length = fmt_opt(self.constants.length_bound());
        let mut out = String::with_capacity(64 * (traj.checkpoints.len() + 1));
        out.push_str(TRIAL_HEADER);
        out.push('\n');
        for c in &traj.checkpoints {
            let _ = writeln!(
                out,
                "{trial},{},{},{},{},{},{},{},{},{}",
                c.n,
                fmt_float(c.gamma),
                fmt_opt(c.gap),
                fmt_opt(c.fenchel),
                fmt_opt(c.distance),
                if m.length { fmt_float(c.length) } else { String::new() },
                fmt_opt(c.ergodic_gap),
                fmt_opt(self.row_gap_bound(c)),
                bound_length,
            );
        }
        out
    }
}

fn resolve_candidate(spec: &CandidateSpec, game: &dyn Game<f64>) -> Result<Vec<f64>, CliError> {
    let tol = Tolerances::default();
    match spec {
        CandidateSpec::ClosedForm => game.closed_form_equilibrium().ok_or_else(|| {
            CliError::Config(format!(
                "candidate.source = closed-form is not available for the {} game; use oracle or explicit",
                game.name()
            ))
        }),
        CandidateSpec::Oracle { method } => nash_oracle(game, (*method).into(), &tol)
            .map(|c| c.point)
            .map_err(|e| CliError::Config(format!("candidate oracle failed: {e}"))),
        CandidateSpec::Explicit { point } => {
            if point.len() != game.action_space().dim() {
                return Err(CliError::Config(format!(
                    "candidate.point has {} entries, expected {}",
                    point.len(),
                    game.action_space().dim()
                )));
            }
            if !game.action_space().contains(point)? {
                return Err(CliError::Config("candidate.point is not a feasible profile".into()));
            }
            Ok(supplied_candidate(game, point.clone())?.point)
        }
    }
}

/// Distribution of one metric across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stats {
    /// Values are summed in the given (trial) order.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            trials: values.len(),
            mean,
            std_error: (var / n).sqrt(),
            median: quantile(&sorted, 0.5),
            q10: quantile(&sorted, 0.1),
            q90: quantile(&sorted, 0.9),
        })
    }
}

/// One summary row; `n` is a step, `final`, or `stop`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: String,
    pub metric: String,
    pub stats: Stats,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub rows: Vec<SummaryRow>,
    pub assertions: Vec<AssertionOutcome>,
    pub files: Vec<PathBuf>,
}

impl BatchReport {
    pub fn row(&self, n: &str, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.n == n && r.metric == metric)
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn metric_value(c: &Checkpoint<f64>, metric: &str, with_length: bool) -> Option<f64> {
    match metric {
        "gap" => c.gap,
        "fenchel" => c.fenchel,
        "distance" => c.distance,
        "length" => with_length.then_some(c.length),
        "ergodic_gap" => c.ergodic_gap,
        _ => None,
    }
}

pub fn summarize(exp: &Experiment, trajectories: &[Trajectory<f64>]) -> Vec<SummaryRow> {
    let with_length = exp.run.metrics.length;
    let mut steps: Vec<usize> = trajectories.iter().flat_map(|t| t.checkpoints.iter().map(|c| c.n)).collect();
    steps.sort_unstable();
    steps.dedup();
    let mut rows = Vec::new();
    for &n in &steps {
        let at: Vec<&Checkpoint<f64>> = trajectories.iter().filter_map(|t| t.checkpoint(n)).collect();
        for metric in METRICS {
            let values: Vec<f64> = at.iter().filter_map(|c| metric_value(c, metric, with_length)).collect();
            if let Some(stats) = Stats::of(&values) {
                let bound = (metric == "ergodic_gap").then(|| exp.row_gap_bound(at[0])).flatten();
                rows.push(SummaryRow { n: n.to_string(), metric: metric.into(), stats, bound });
            }
        }
    }
    let finals: Vec<&Checkpoint<f64>> = trajectories.iter().filter_map(|t| t.final_checkpoint()).collect();
    let same_end = finals.windows(2).all(|w| w[0].n == w[1].n);
    for metric in METRICS {
        let values: Vec<f64> = finals.iter().filter_map(|c| metric_value(c, metric, with_length)).collect();
        if let Some(stats) = Stats::of(&values) {
            let bound = (metric == "ergodic_gap" && same_end).then(|| exp.row_gap_bound(finals[0])).flatten();
            rows.push(SummaryRow { n: "final".into(), metric: metric.into(), stats, bound });
        }
    }
    if exp.run.watch_radius.is_some() {
        let hits: Vec<_> = trajectories.iter().filter_map(|t| t.hit).collect();
        let times: Vec<f64> = hits.iter().map(|h| h.n as f64).collect();
        let lengths: Vec<f64> = hits.iter().map(|h| h.length).collect();
        if let Some(stats) = Stats::of(&times) {
            rows.push(SummaryRow { n: "stop".into(), metric: "stopping_time".into(), stats, bound: None });
        }
        if let Some(stats) = Stats::of(&lengths) {
            rows.push(SummaryRow {
                n: "stop".into(),
                metric: "stopping_length".into(),
                stats,
                bound: exp.constants.length_bound(),
            });
        }
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.stats;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.metric,
            s.trials,
            fmt_float(s.mean),
            fmt_float(s.std_error),
            fmt_float(s.median),
            fmt_float(s.q10),
            fmt_float(s.q90),
            fmt_opt(r.bound)
        );
    }
    out
}

pub fn check_assertions(exp: &Experiment, trajectories: &[Trajectory<f64>], rows: &[SummaryRow]) -> Vec<AssertionOutcome> {
    let a = &exp.config.assertions;
    let mut out = Vec::new();
    let final_distances: Vec<f64> =
        trajectories.iter().filter_map(|t| t.final_checkpoint().and_then(|c| c.distance)).collect();
    if let Some(max) = a.median_final_distance_max {
        let median = Stats::of(&final_distances).map_or(f64::NAN, |s| s.median);
        out.push(AssertionOutcome {
            name: "median_final_distance_max".into(),
            passed: median <= max,
            detail: format!("median final distance {median:.6} (limit {max})"),
        });
    }
    if let Some(f) = a.final_distance_fraction {
        let below = final_distances.iter().filter(|&&d| d < f.threshold).count();
        let fraction = below as f64 / trajectories.len() as f64;
        out.push(AssertionOutcome {
            name: "final_distance_fraction".into(),
            passed: fraction >= f.at_least,
            detail: format!("{fraction:.3} of trials below {} (need {})", f.threshold, f.at_least),
        });
    }
    if a.ergodic_gap_within_bound {
        let row = rows.iter().find(|r| r.n == "final" && r.metric == "ergodic_gap");
        let (passed, detail) = match row.and_then(|r| r.bound.map(|b| (r, b))) {
            Some((r, b)) => {
                let upper = r.stats.mean + 2.0 * r.stats.std_error;
                (upper <= b, format!("mean + 2 s.e. = {upper:.6e}, bound {b:.6e}"))
            }
            None => (false, "no common final step to compare against the bound".into()),
        };
        out.push(AssertionOutcome { name: "ergodic_gap_within_bound".into(), passed, detail });
    }
    if a.stopping_length_within_bound {
        let missed = trajectories.iter().filter(|t| t.hit.is_none()).count();
        let row = rows.iter().find(|r| r.metric == "stopping_length");
        let (passed, detail) = match (row, exp.constants.length_bound()) {
            (Some(r), Some(b)) if missed == 0 => {
                (r.stats.mean <= b, format!("mean stopping length {:.6e}, bound {b:.6e}", r.stats.mean))
            }
            (_, None) => (false, "length bound undefined (needs a square-summable step policy)".into()),
            _ => (false, format!("{missed} trials never reached the target neighbourhood")),
        };
        out.push(AssertionOutcome { name: "stopping_length_within_bound".into(), passed, detail });
    }
    out
}

/// Worker pool size from `GAMEDA_THREADS`, if set.
pub fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var("GAMEDA_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("GAMEDA_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

/// Runs every trial on a worker pool; results come back in trial order.
pub fn run_trials(exp: &Experiment) -> Result<Vec<Trajectory<f64>>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..exp.config.run.trials).into_par_iter().map(|t| exp.trial(t)).collect())
}

pub fn trial_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial:04}.csv"))
}

/// Loads, runs and writes one experiment. Outputs are only written once
/// every trial has finished, and removed again if writing fails midway.
pub fn cmd_run(config_path: &Path) -> Result<BatchReport, CliError> {
    let config = ExperimentConfig::load(config_path)?;
    execute(config)
}

pub fn execute(config: ExperimentConfig) -> Result<BatchReport, CliError> {
    let exp = Experiment::prepare(config)?;
    let trajectories = run_trials(&exp)?;
    let rows = summarize(&exp, &trajectories);
    let assertions = check_assertions(&exp, &trajectories, &rows);

    let dir = &exp.config.output.dir;
    let mut files = Vec::new();
    let written = (|| -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (t, traj) in trajectories.iter().enumerate() {
            let path = trial_path(dir, t);
            files.push(path.clone());
            std::fs::write(&path, exp.trial_csv(t, traj))?;
        }
        let summary = dir.join("summary.csv");
        files.push(summary.clone());
        std::fs::write(&summary, summary_csv(&rows))
    })();
    if let Err(e) = written {
        for f in &files {
            let _ = std::fs::remove_file(f);
        }
        return Err(CliError::Io(format!("cannot write outputs to {}: {e}", dir.display())));
    }
    Ok(BatchReport { rows, assertions, files })
}
