//! Experiment configuration: a TOML document with one table per concern.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gameda::analysis::OracleMethod;
use gameda::engine::{Init, MetricSet, NoiseModel, StepPolicy};
use gameda::regularizer::RegularizerKind;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    #[serde(default)]
    pub regularizer: RegularizerSpec,
    pub step: StepSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub candidate: CandidateSpec,
    #[serde(default, skip_serializing_if = "BoundsSpec::is_empty")]
    pub bounds: BoundsSpec,
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "AssertionSpec::is_empty")]
    pub assertions: AssertionSpec,
}

/// A scalar shared by every player or one value per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPlayer {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerPlayer {
    pub fn expand(&self, players: usize, field: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerPlayer::Shared(v) => Ok(vec![*v; players]),
            PerPlayer::Each(v) if v.len() == players => Ok(v.clone()),
            PerPlayer::Each(v) => Err(CliError::Config(format!(
                "{field} has {} entries but the game has {players} players",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSpec {
    Cournot { firms: usize, a: f64, b: PerPlayer, c: PerPlayer, capacity: PerPlayer },
    MatchingPennies,
    /// Two-player zero-sum matrix game on mixed strategies.
    Bilinear { matrix: Vec<Vec<f64>> },
    NonConcave { dim: usize },
    /// A finite or congestion game document; relative paths resolve against
    /// the config file's directory.
    Document { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizerName {
    Euclidean,
    Entropic,
}

impl From<RegularizerName> for RegularizerKind {
    fn from(r: RegularizerName) -> Self {
        match r {
            RegularizerName::Euclidean => RegularizerKind::Euclidean,
            RegularizerName::Entropic => RegularizerKind::Entropic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerSpec {
    /// One kind for every player, or one per player.
    pub kinds: Vec<RegularizerName>,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self { kinds: vec![RegularizerName::Euclidean] }
    }
}

impl RegularizerSpec {
    pub fn expand(&self, players: usize) -> Result<Vec<RegularizerKind>, CliError> {
        match self.kinds.len() {
            1 => Ok(vec![self.kinds[0].into(); players]),
            n if n == players => Ok(self.kinds.iter().map(|&k| k.into()).collect()),
            n => Err(CliError::Config(format!(
                "regularizer.kinds has {n} entries but the game has {players} players"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSpec {
    Constant {
        gamma: f64,
    },
    Power {
        initial: f64,
        exponent: f64,
    },
    /// Constant step tuned to the horizon; `k`, `omega` and `v_star` default
    /// to the values derived from the game, regularizer and noise.
    HorizonOptimal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v_star: Option<f64>,
    },
}

impl StepSpec {
    pub fn resolve(&self, horizon: usize, k: f64, omega: f64, v_star: f64) -> StepPolicy<f64> {
        match *self {
            StepSpec::Constant { gamma } => StepPolicy::Constant(gamma),
            StepSpec::Power { initial, exponent } => StepPolicy::Power { initial, exponent },
            StepSpec::HorizonOptimal { k: k2, omega: o2, v_star: v2 } => StepPolicy::HorizonOptimal {
                horizon,
                k: k2.unwrap_or(k),
                omega: o2.unwrap_or(omega),
                v_star: v2.unwrap_or(v_star),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    Uniform {
        sigma: f64,
    },
    StateScaled {
        sigma: f64,
    },
    /// Finite games only: sampled pure-strategy payoff vectors, plus
    /// optional Gaussian noise of size `sigma`.
    ActionSampling {
        #[serde(default)]
        sigma: f64,
    },
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel<f64> {
        match *self {
            NoiseSpec::None => NoiseModel::None,
            NoiseSpec::Gaussian { sigma } => NoiseModel::GaussianIid { sigma },
            NoiseSpec::Uniform { sigma } => NoiseModel::UniformBounded { sigma },
            NoiseSpec::StateScaled { sigma } => NoiseModel::StateScaled { sigma },
            NoiseSpec::ActionSampling { sigma } => NoiseModel::FiniteGameSampling { extra_sigma: sigma },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Gap,
    Fenchel,
    Distance,
    Length,
    ErgodicGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    #[default]
    Zero,
    Scores(Vec<f64>),
    Action(Vec<f64>),
}

impl InitSpec {
    pub fn init(&self) -> Init<f64> {
        match self {
            InitSpec::Zero => Init::Zero,
            InitSpec::Scores(y) => Init::Scores(y.clone()),
            InitSpec::Action(x) => Init::Action(x.clone()),
        }
    }
}

fn all_metrics() -> Vec<Metric> {
    vec![Metric::Gap, Metric::Fenchel, Metric::Distance, Metric::Length, Metric::ErgodicGap]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    /// Extra checkpoint every `stride` steps on top of the powers of two;
    /// defaults to `max(1, horizon / 1000)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl RunSpec {
    pub fn metric_set(&self) -> MetricSet {
        let has = |m| self.metrics.contains(&m);
        MetricSet {
            gap: has(Metric::Gap),
            fenchel: has(Metric::Fenchel),
            distance: has(Metric::Distance),
            length: has(Metric::Length),
            ergodic_gap: has(Metric::ErgodicGap),
        }
    }

    pub fn checkpoint_stride(&self) -> usize {
        self.stride.unwrap_or((self.horizon / 1000).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleName {
    BestResponseGrid,
    FixedPointProjection,
}

impl From<OracleName> for OracleMethod {
    fn from(o: OracleName) -> Self {
        match o {
            OracleName::BestResponseGrid => OracleMethod::BestResponseGrid,
            OracleName::FixedPointProjection => OracleMethod::FixedPointProjection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CandidateSpec {
    #[default]
    ClosedForm,
    Oracle {
        method: OracleName,
    },
    Explicit {
        point: Vec<f64>,
    },
}

/// Strong-stability modulus: a number, or `"hessian"` for `-lambda_max` of
/// the game Hessian on the tangent span at the candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Modulus {
    Value(f64),
    Source(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_stability: Option<Modulus>,
    /// Radius of the target neighbourhood for the stopping time and the
    /// running-length bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// End each trial once it first enters the `epsilon`-neighbourhood.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stop_at_epsilon: bool,
}

impl BoundsSpec {
    fn is_empty(&self) -> bool {
        self == &Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionBelow {
    pub threshold: f64,
    pub at_least: f64,
}

/// Checks evaluated on the summary; any failure exits with status 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AssertionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_final_distance_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_distance_fraction: Option<FractionBelow>,
    /// Mean final ergodic gap plus two standard errors is below its bound.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ergodic_gap_within_bound: bool,
    /// Mean running length at the stopping time is below its bound.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stopping_length_within_bound: bool,
}

impl AssertionSpec {
    fn is_empty(&self) -> bool {
        self == &Self::default()
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads and validates a config file; the game document path (if any)
    /// is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_text(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let GameSpec::Document { path: doc } = &mut config.game {
            if doc.is_relative() {
                *doc = base.join(&*doc);
            }
        }
        if config.output.dir.is_relative() {
            config.output.dir = base.join(&config.output.dir);
        }
        Ok(config)
    }

    /// Checks that do not need the game itself.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.run.horizon == 0 {
            return bad("run.horizon must be at least 1".into());
        }
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1".into());
        }
        if self.run.stride == Some(0) {
            return bad("run.stride must be at least 1".into());
        }
        if self.regularizer.kinds.is_empty() {
            return bad("regularizer.kinds must not be empty".into());
        }
        match self.step {
            StepSpec::Constant { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                return bad(format!("step.gamma must be positive, got {gamma}"))
            }
            StepSpec::Power { initial, .. } if !(initial > 0.0 && initial.is_finite()) => {
                return bad(format!("step.initial must be positive, got {initial}"))
            }
            StepSpec::Power { exponent, .. } if !(exponent > 0.0 && exponent <= 1.0) => {
                return bad(format!("step.exponent must lie in (0, 1], got {exponent}"))
            }
            StepSpec::HorizonOptimal { k, omega, v_star } => {
                for (name, v) in [("k", k), ("omega", omega), ("v_star", v_star)] {
                    if let Some(v) = v {
                        if !(v > 0.0 && v.is_finite()) {
                            return bad(format!("step.{name} must be positive, got {v}"));
                        }
                    }
                }
            }
            _ => {}
        }
        let sigma = self.noise.model().sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return bad(format!("noise.sigma must be nonnegative, got {sigma}"));
        }
        if let Some(eps) = self.bounds.epsilon {
            if !(eps > 0.0) {
                return bad(format!("bounds.epsilon must be positive, got {eps}"));
            }
        }
        if self.bounds.stop_at_epsilon && self.bounds.epsilon.is_none() {
            return bad("bounds.stop_at_epsilon requires bounds.epsilon".into());
        }
        match &self.bounds.strong_stability {
            Some(Modulus::Value(l)) if !(*l > 0.0) => {
                return bad(format!("bounds.strong_stability must be positive, got {l}"))
            }
            Some(Modulus::Source(s)) if s != "hessian" => {
                return bad(format!("bounds.strong_stability must be a number or \"hessian\", got {s:?}"))
            }
            _ => {}
        }
        let metrics = self.run.metric_set();
        let a = &self.assertions;
        if (a.median_final_distance_max.is_some() || a.final_distance_fraction.is_some()) && !metrics.distance {
            return bad("distance assertions need the distance metric in run.metrics".into());
        }
        if a.ergodic_gap_within_bound && !metrics.ergodic_gap {
            return bad("assertions.ergodic_gap_within_bound needs the ergodic-gap metric".into());
        }
        if a.stopping_length_within_bound
            && (self.bounds.epsilon.is_none() || self.bounds.strong_stability.is_none())
        {
            return bad("assertions.stopping_length_within_bound needs bounds.epsilon and bounds.strong_stability".into());
        }
        if let GameSpec::Cournot { firms, .. } = self.game {
            if firms == 0 {
                return bad("game.firms must be at least 1".into());
            }
        }
        if let GameSpec::NonConcave { dim } = self.game {
            if dim == 0 {
                return bad("game.dim must be at least 1".into());
            }
        }
        Ok(())
    }
}
