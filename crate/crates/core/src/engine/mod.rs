//! Dual averaging: `X_n = Q(Y_n)`, `Y_{n+1} = Y_n + gamma_n v_hat_{n+1}`.

mod continuous;
mod noise;
mod step;

pub use continuous::{continuous_reference, ContinuousPath};
pub use noise::{sample_categorical, state_scale, NoiseModel};
pub use step::{gap_ergodic_bound, gap_ergodic_optimal_bound, length_bound, zeta, StepPolicy};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::gap_from_gradient;
use crate::error::{check_dim, Error, Result};
use crate::games::Game;
use crate::regularizer::ProductRegularizer;
use crate::scalar::{dist2, norm_inf, Scalar};

/// Scores beyond this magnitude abort the run.
pub const SCORE_LIMIT: f64 = 1e12;

/// Per-trial generator: ChaCha8 seeded by the master seed, one stream per
/// trial, so results do not depend on how trials are scheduled.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Starting score `Y_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<T> {
    Zero,
    Scores(Vec<T>),
    /// A dual witness of this action (`x` itself or `log x`).
    Action(Vec<T>),
}

impl<T: Scalar> Init<T> {
    pub fn resolve(&self, reg: &ProductRegularizer<T>) -> Result<Vec<T>> {
        match self {
            Init::Zero => Ok(vec![T::zero(); reg.dim()]),
            Init::Scores(y) => {
                check_dim(reg.dim(), y.len())?;
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Usage("initial scores must be finite".into()));
                }
                Ok(y.clone())
            }
            Init::Action(x) => {
                check_dim(reg.dim(), x.len())?;
                reg.space().require_feasible(x)?;
                reg.dual_witness(x).ok_or_else(|| {
                    Error::Usage("initial action has no dual witness (entropic maps need interior points)".into())
                })
            }
        }
    }
}

/// Which per-checkpoint metrics to evaluate. The running length is always
/// tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricSet {
    pub gap: bool,
    pub fenchel: bool,
    pub distance: bool,
    pub length: bool,
    pub ergodic_gap: bool,
}

impl MetricSet {
    pub fn all() -> Self {
        Self { gap: true, fenchel: true, distance: true, length: true, ergodic_gap: true }
    }

    pub fn needs_candidates(&self) -> bool {
        self.gap || self.fenchel || self.distance || self.ergodic_gap
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub horizon: usize,
    pub policy: StepPolicy<T>,
    pub noise: NoiseModel<T>,
    pub init: Init<T>,
    /// Candidate equilibrium set `X*` for the metrics.
    pub candidates: Vec<Vec<T>>,
    pub metrics: MetricSet,
    /// Keep a raw `(Y, X, v_hat)` record every `record_stride` steps; 0 keeps
    /// none.
    pub record_stride: usize,
    /// Checkpoints are the powers of two, the final step, and (if nonzero)
    /// every multiple of this stride.
    pub checkpoint_stride: usize,
    /// Track the first step within this Euclidean distance of `X*`.
    pub watch_radius: Option<T>,
    /// End the run at the first step within `watch_radius`.
    pub stop_on_hit: bool,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(horizon: usize, policy: StepPolicy<T>, noise: NoiseModel<T>) -> Self {
        Self {
            horizon,
            policy,
            noise,
            init: Init::Zero,
            candidates: Vec::new(),
            metrics: MetricSet::default(),
            record_stride: 0,
            checkpoint_stride: 0,
            watch_radius: None,
            stop_on_hit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Usage("horizon must be at least 1".into()));
        }
        self.policy.validate()?;
        self.noise.validate()?;
        if (self.metrics.needs_candidates() || self.watch_radius.is_some()) && self.candidates.is_empty() {
            return Err(Error::Usage("metrics need a candidate equilibrium".into()));
        }
        if let Some(r) = self.watch_radius {
            if !(r > T::zero()) {
                return Err(Error::Usage("watch radius must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn is_checkpoint(&self, n: usize) -> bool {
        n.is_power_of_two() || n == self.horizon || (self.checkpoint_stride > 0 && n % self.checkpoint_stride == 0)
    }
}

/// Raw state at step `n`: `(Y_n, X_n, v_hat_{n+1}, gamma_n, l_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub n: usize,
    pub scores: Vec<T>,
    pub action: Vec<T>,
    pub feedback: Vec<T>,
    pub gamma: T,
    pub length: T,
}

/// Metric row at step `n`. Metrics not requested are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub n: usize,
    pub gamma: T,
    pub gap: Option<T>,
    pub fenchel: Option<T>,
    pub distance: Option<T>,
    pub length: T,
    /// `sum gamma_k eps(X_k) / sum gamma_k` over `k <= n`.
    pub ergodic_gap: Option<T>,
    pub ergodic_average: Vec<T>,
    pub gamma_sum: T,
    pub gamma_square_sum: T,
}

/// First step within the watch radius and the running length there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<T> {
    pub n: usize,
    pub length: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// Last step taken (the horizon unless stopped early).
    pub steps: usize,
    pub records: Vec<Record<T>>,
    pub checkpoints: Vec<Checkpoint<T>>,
    pub final_action: Vec<T>,
    /// `Y_{steps + 1}`.
    pub final_scores: Vec<T>,
    pub length: T,
    /// Last step at which the action changed (1 if it never did).
    pub last_move: usize,
    pub hit: Option<Hit<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_checkpoint(&self) -> Option<&Checkpoint<T>> {
        self.checkpoints.last()
    }

    pub fn checkpoint(&self, n: usize) -> Option<&Checkpoint<T>> {
        self.checkpoints.binary_search_by_key(&n, |c| c.n).ok().map(|k| &self.checkpoints[k])
    }
}

/// One recursion step from `(Y_n, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub next_scores: Vec<T>,
    pub action: Vec<T>,
    pub feedback: Vec<T>,
}

pub fn da_step<T, G, R>(
    scores: &[T],
    n: usize,
    game: &G,
    reg: &ProductRegularizer<T>,
    policy: &StepPolicy<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<StepOutcome<T>>
where
    T: Scalar,
    G: Game<T> + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::Usage("steps are indexed from 1".into()));
    }
    check_dim(game.action_space().dim(), scores.len())?;
    let mut action = vec![T::zero(); scores.len()];
    reg.choice_into(scores, &mut action);
    let mut feedback = vec![T::zero(); scores.len()];
    game.gradient_into(&action, &mut feedback);
    noise.observe(game, &action, &mut feedback, &mut Vec::new(), rng)?;
    let gamma = policy.gamma(n);
    let next_scores = scores.iter().zip(&feedback).map(|(&y, &v)| y + gamma * v).collect();
    Ok(StepOutcome { next_scores, action, feedback })
}

/// Runs the recursion from `Y_1` up to the horizon.
pub fn run<T, G, R>(game: &G, reg: &ProductRegularizer<T>, config: &RunConfig<T>, rng: &mut R) -> Result<Trajectory<T>>
where
    T: Scalar,
    G: Game<T> + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let d = game.action_space().dim();
    check_dim(d, reg.dim())?;
    for c in &config.candidates {
        check_dim(d, c.len())?;
        game.action_space().require_feasible(c)?;
    }
    let m = &config.metrics;
    let candidates = &config.candidates;

    let mut y = config.init.resolve(reg)?;
    let mut x = vec![T::zero(); d];
    let mut prev = vec![T::zero(); d];
    let mut delta = vec![T::zero(); d];
    let mut v = vec![T::zero(); d];
    let mut v_hat = vec![T::zero(); d];
    let mut ergodic_sum = vec![T::zero(); d];
    let mut scratch = Vec::new();

    let mut length = T::zero();
    let mut gamma_sum = T::zero();
    let mut gamma_square_sum = T::zero();
    let mut weighted_gap = T::zero();
    let mut last_move = 1;
    let mut hit = None;
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    let mut steps = 0;

    for n in 1..=config.horizon {
        steps = n;
        reg.choice_into(&y, &mut x);
        if n > 1 {
            for k in 0..d {
                delta[k] = x[k] - prev[k];
            }
            length += reg.norm(&delta);
            if x != prev {
                last_move = n;
            }
        }
        let gamma = config.policy.gamma(n);
        game.gradient_into(&x, &mut v);
        gamma_sum += gamma;
        gamma_square_sum += gamma * gamma;
        for k in 0..d {
            ergodic_sum[k] += gamma * x[k];
        }
        let gap = (m.gap || m.ergodic_gap).then(|| gap_from_gradient(&v, &x, candidates));
        if let (Some(g), true) = (gap, m.ergodic_gap) {
            weighted_gap += gamma * g;
        }
        let distance = if m.distance || config.watch_radius.is_some() {
            Some(candidates.iter().map(|c| dist2(&x, c)).fold(T::infinity(), |a, b| a.min(b)))
        } else {
            None
        };
        let mut stop = false;
        if let (Some(r), Some(dist), None) = (config.watch_radius, distance, hit) {
            if dist <= r {
                hit = Some(Hit { n, length });
                stop = config.stop_on_hit;
            }
        }

        if config.is_checkpoint(n) || stop {
            let fenchel = m.fenchel.then(|| {
                candidates
                    .iter()
                    .map(|c| reg.fenchel_unchecked(c, &y))
                    .fold(T::infinity(), |a, b| a.min(b))
            });
            checkpoints.push(Checkpoint {
                n,
                gamma,
                gap: gap.filter(|_| m.gap),
                fenchel,
                distance: distance.filter(|_| m.distance),
                length,
                ergodic_gap: m.ergodic_gap.then(|| weighted_gap / gamma_sum),
                ergodic_average: ergodic_sum.iter().map(|&s| s / gamma_sum).collect(),
                gamma_sum,
                gamma_square_sum,
            });
        }

        v_hat.copy_from_slice(&v);
        config.noise.observe(game, &x, &mut v_hat, &mut scratch, rng)?;
        if config.record_stride > 0 && (n - 1) % config.record_stride == 0 {
            records.push(Record {
                n,
                scores: y.clone(),
                action: x.clone(),
                feedback: v_hat.clone(),
                gamma,
                length,
            });
        }
        for k in 0..d {
            y[k] += gamma * v_hat[k];
        }
        let size = norm_inf(&y);
        if !size.is_finite() || size > T::lit(SCORE_LIMIT) {
            return Err(Error::NumericAbort {
                n,
                detail: format!("score magnitude {size} exceeds {SCORE_LIMIT:e}"),
            });
        }
        std::mem::swap(&mut prev, &mut x);
        if stop {
            break;
        }
    }
    // `prev` holds the last action after the final swap
    Ok(Trajectory {
        steps,
        records,
        checkpoints,
        final_action: prev,
        final_scores: y,
        length,
        last_move,
        hit,
    })
}

/// `X_bar_n = sum_{k<=n} gamma_k X_k / sum_{k<=n} gamma_k`, from the
/// checkpoint at `n` or from unthinned raw records.
pub fn ergodic_average<T: Scalar>(traj: &Trajectory<T>, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::Usage("ergodic average needs n >= 1".into()));
    }
    if n > traj.steps {
        return Err(Error::Usage(format!("n = {n} exceeds the {} recorded steps", traj.steps)));
    }
    if let Some(c) = traj.checkpoint(n) {
        return Ok(c.ergodic_average.clone());
    }
    let head = &traj.records[..traj.records.len().min(n)];
    if head.len() != n || head.iter().enumerate().any(|(k, r)| r.n != k + 1) {
        return Err(Error::Usage(format!("step {n} is neither a checkpoint nor covered by full records")));
    }
    let mut sum = vec![T::zero(); head[0].action.len()];
    let mut weight = T::zero();
    for r in head {
        weight += r.gamma;
        for (s, &x) in sum.iter_mut().zip(&r.action) {
            *s += r.gamma * x;
        }
    }
    Ok(sum.into_iter().map(|s| s / weight).collect())
}

/// First recorded step within Euclidean distance `epsilon` of `X*`, with the
/// running length there. Exact only when records are unthinned.
pub fn stopping_time<T: Scalar>(traj: &Trajectory<T>, candidates: &[Vec<T>], epsilon: T) -> Result<Option<Hit<T>>> {
    if !(epsilon > T::zero()) {
        return Err(Error::Usage("epsilon must be positive".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Usage("stopping time needs a candidate set".into()));
    }
    Ok(traj
        .records
        .iter()
        .find(|r| candidates.iter().any(|c| dist2(&r.action, c) <= epsilon))
        .map(|r| Hit { n: r.n, length: r.length }))
}
