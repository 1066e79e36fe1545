//! Named property suites: randomized checks of the library's invariants with
//! a fixed seed, reporting the worst slack per property.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::{first_order_residual, nash_oracle, OracleMethod, Tolerances};
use crate::engine::{continuous_reference, run, NoiseModel, RunConfig, StepPolicy};
use crate::error::{Error, Result};
use crate::games::{
    BilinearZeroSum, CongestionGame, CongestionPlayer, Cournot, FiniteGame, Game, NonConcaveStable, Resource,
};
use crate::geometry::{ConvexSet, ProductSet};
use crate::regularizer::{ProductRegularizer, RegularizerKind};
use crate::scalar::{dot, norm2};

pub const SUITES: [&str; 7] = ["fenchel", "gradients", "cones", "noise", "descent", "lyapunov", "all"];

const SEED: u64 = 0x5eed_da;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub samples: usize,
    /// Smallest margin by which the property held (negative if violated).
    pub slack: f64,
    pub passed: bool,
}

impl PropertyOutcome {
    /// Passes when `slack >= -allowance`.
    fn new(name: impl Into<String>, samples: usize, slack: f64, allowance: f64) -> Self {
        Self { name: name.into(), samples, slack, passed: slack >= -allowance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub properties: Vec<PropertyOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            writeln!(
                f,
                "{} {:<40} samples={:<7} worst_slack={:.3e}",
                if p.passed { "PASS" } else { "FAIL" },
                p.name,
                p.samples,
                p.slack
            )?;
        }
        Ok(())
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    let properties = match name {
        "fenchel" => fenchel()?,
        "gradients" => gradients()?,
        "cones" => cones()?,
        "noise" => noise()?,
        "descent" => descent()?,
        "lyapunov" => lyapunov()?,
        "all" => {
            let mut all = Vec::new();
            for s in &SUITES[..SUITES.len() - 1] {
                all.extend(run_suite(s)?.properties);
            }
            all
        }
        other => {
            return Err(Error::Usage(format!("unknown suite `{other}` (expected one of {})", SUITES.join(", "))))
        }
    };
    Ok(SuiteReport { suite: name.to_string(), properties })
}

fn gaussian<R: Rng>(d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Log-uniform magnitude in `[1e-2, 1e2]`.
fn magnitude<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-2.0..2.0))
}

fn regularizers() -> Result<Vec<(&'static str, ProductRegularizer<f64>)>> {
    let euclid = RegularizerKind::Euclidean;
    let entropic = RegularizerKind::Entropic;
    let boxes = ProductSet::new(vec![
        ConvexSet::new_box(vec![0.0, -1.0], vec![10.0, 2.0])?,
        ConvexSet::cube(0.0, 1.0, 1)?,
    ])?;
    let simplices = ProductSet::new(vec![ConvexSet::simplex(2.5, 3)?, ConvexSet::unit_simplex(2)?])?;
    let mixed = ProductSet::new(vec![ConvexSet::cube(-1.0, 1.0, 2)?, ConvexSet::simplex(0.5, 4)?])?;
    Ok(vec![
        ("euclidean-box", ProductRegularizer::uniform(boxes, euclid)?),
        ("euclidean-simplex", ProductRegularizer::uniform(simplices.clone(), euclid)?),
        ("entropic-simplex", ProductRegularizer::uniform(simplices, entropic)?),
        ("mixed-product", ProductRegularizer::new(mixed, &[euclid, entropic])?),
    ])
}

fn fenchel() -> Result<Vec<PropertyOutcome>> {
    const INSTANCES: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    for (label, reg) in regularizers()? {
        let d = reg.dim();
        let k = reg.strong_convexity();
        let (mut norm_slack, mut bound_slack, mut grad_slack) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for s in 0..INSTANCES {
            let p = if s % 2 == 0 { reg.space().sample(&mut rng) } else { reg.space().sample_with_faces(&mut rng) };
            let y = gaussian(d, magnitude(&mut rng), &mut rng);
            let v = gaussian(d, magnitude(&mut rng), &mut rng);
            let x = reg.choice(&y)?;
            let f = reg.fenchel(&p, &y)?;
            let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            norm_slack = norm_slack.min(f - 0.5 * k * reg.norm(&diff).powi(2));

            let y2: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + b).collect();
            let rhs = f + dot(&v, &diff) + reg.dual_norm(&v).powi(2) / (2.0 * k);
            bound_slack = bound_slack.min(rhs - reg.fenchel(&p, &y2)?);

            if s % 10 == 0 {
                // grad h*(y) = Q(y), central differences
                let y_small = gaussian(d, 3.0, &mut rng);
                let q = reg.choice(&y_small)?;
                let h = 1e-6;
                for l in 0..d {
                    let mut up = y_small.clone();
                    let mut dn = y_small.clone();
                    up[l] += h;
                    dn[l] -= h;
                    let fd = (reg.conjugate(&up)? - reg.conjugate(&dn)?) / (2.0 * h);
                    grad_slack = grad_slack.min(1e-6 - (fd - q[l]).abs());
                }
            }
        }
        out.push(PropertyOutcome::new(format!("fenchel-norm {label}"), INSTANCES, norm_slack, 1e-9));
        out.push(PropertyOutcome::new(format!("fenchel-bound {label}"), INSTANCES, bound_slack, 1e-9));
        out.push(PropertyOutcome::new(format!("conjugate-gradient {label}"), INSTANCES / 10, grad_slack, 0.0));
    }
    Ok(out)
}

/// One instance of each game family, as exercised by the suites.
pub fn reference_games() -> Result<Vec<Box<dyn Game<f64>>>> {
    let congestion = CongestionGame::new(
        vec![
            Resource { name: "a".into(), alpha: 1.0, beta: 0.5 },
            Resource { name: "b".into(), alpha: 0.2, beta: 2.0 },
            Resource { name: "c".into(), alpha: 0.0, beta: 1.0 },
        ],
        vec![
            CongestionPlayer {
                load: 1.0,
                path_names: vec!["ab".into(), "c".into()],
                paths: vec![vec![0, 1], vec![2]],
            },
            CongestionPlayer {
                load: 2.0,
                path_names: vec!["a".into(), "bc".into(), "c".into()],
                paths: vec![vec![0], vec![1, 2], vec![2]],
            },
        ],
    )?;
    let finite = FiniteGame::from_fn(vec![2, 3, 2], |i, p| {
        let s = (i + 1) as f64;
        (s * p[0] as f64 - 0.7 * p[1] as f64 + 0.3 * (p[2] * (i + 2)) as f64).sin() * 3.0
    })?;
    let bilinear = BilinearZeroSum::new(
        vec![vec![1.0, -2.0, 0.5], vec![-1.0, 3.0, 0.0]],
        ConvexSet::unit_simplex(2)?,
        ConvexSet::cube(-1.0, 1.0, 3)?,
    )?;
    Ok(vec![
        Box::new(Cournot::new(5.0, vec![1.0, 0.5, 2.0], vec![1.0, 0.5, 0.0], vec![10.0, 4.0, 6.0])?),
        Box::new(congestion),
        Box::new(finite),
        Box::new(bilinear),
        Box::new(NonConcaveStable::new(3)?),
    ])
}

fn gradients() -> Result<Vec<PropertyOutcome>> {
    const POINTS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut out = Vec::new();
    for game in reference_games()? {
        let space = game.action_space();
        let d = space.dim();
        let (mut worst_grad, mut worst_hess) = (0.0f64, 0.0f64);
        for s in 0..POINTS {
            let x = if s % 2 == 0 { space.sample(&mut rng) } else { space.sample_with_faces(&mut rng) };
            let v = game.gradient_field(&x)?;
            let h = 1e-6;
            for i in 0..space.players() {
                for l in space.range(i) {
                    let mut up = x.clone();
                    let mut dn = x.clone();
                    up[l] += h;
                    dn[l] -= h;
                    let fd = (game.payoff_unchecked(i, &up) - game.payoff_unchecked(i, &dn)) / (2.0 * h);
                    worst_grad = worst_grad.max((fd - v[l]).abs() / v[l].abs().max(1.0));
                }
            }
            let hess = game.hessian(&x)?;
            let h = 1e-4;
            let mut jac = vec![vec![0.0; d]; d];
            let (mut gu, mut gd) = (vec![0.0; d], vec![0.0; d]);
            for l in 0..d {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[l] += h;
                dn[l] -= h;
                game.gradient_into(&up, &mut gu);
                game.gradient_into(&dn, &mut gd);
                for r in 0..d {
                    jac[r][l] = (gu[r] - gd[r]) / (2.0 * h);
                }
            }
            for r in 0..d {
                for c in 0..d {
                    let fd = 0.5 * (jac[r][c] + jac[c][r]);
                    worst_hess = worst_hess.max((fd - hess[(r, c)]).abs() / hess[(r, c)].abs().max(1.0));
                }
            }
        }
        out.push(PropertyOutcome::new(format!("gradient {}", game.name()), POINTS, 1e-5 - worst_grad, 0.0));
        out.push(PropertyOutcome::new(format!("hessian {}", game.name()), POINTS, 1e-4 - worst_hess, 0.0));
    }
    Ok(out)
}

fn cones() -> Result<Vec<PropertyOutcome>> {
    const SAMPLES: usize = 5_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut out = Vec::new();
    for (label, reg) in regularizers()? {
        let space = reg.space();
        let d = space.dim();
        let mut polar_ok = true;
        let mut vi_slack = f64::INFINITY;
        let mut tangent_ok = true;
        for _ in 0..SAMPLES {
            let y = gaussian(d, magnitude(&mut rng), &mut rng);
            let x = space.project(&y)?;
            let r: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            polar_ok &= space.polar_cone_contains(&x, &r)?;
            let other = space.sample_with_faces(&mut rng);
            let gap: Vec<f64> = other.iter().zip(&x).map(|(a, b)| a - b).collect();
            vi_slack = vi_slack.min(-dot(&r, &gap) / norm2(&r).max(1.0));
            let at = space.sample_with_faces(&mut rng);
            if let Some(z) = space.sample_tangent(&at, &mut rng)? {
                tangent_ok &= space.tangent_cone_contains(&at, &z)?;
            }
        }
        let flag = |ok: bool| if ok { 0.0 } else { -1.0 };
        out.push(PropertyOutcome::new(format!("projection-residual-polar {label}"), SAMPLES, flag(polar_ok), 0.0));
        out.push(PropertyOutcome::new(format!("projection-variational {label}"), SAMPLES, vi_slack, 1e-9));
        out.push(PropertyOutcome::new(format!("tangent-samples {label}"), SAMPLES, flag(tangent_ok), 0.0));
    }

    let tol = Tolerances::default();
    let dominant =
        FiniteGame::bimatrix(&[vec![3.0, 0.0], vec![4.0, 1.0]], &[vec![3.0, 4.0], vec![0.0, 1.0]])?;
    let oracle_games: Vec<Box<dyn Game<f64>>> = vec![
        Box::new(Cournot::symmetric(3, 5.0, 1.0, 1.0, 10.0)?),
        Box::new(Cournot::new(5.0, vec![1.0, 2.0], vec![1.0, 1.0], vec![10.0, 10.0])?),
        Box::new(dominant),
    ];
    for game in oracle_games {
        let space = game.action_space();
        for method in [OracleMethod::BestResponseGrid, OracleMethod::FixedPointProjection] {
            let c = nash_oracle(game.as_ref(), method, &tol)?;
            let v = game.gradient_field(&c.point)?;
            let mut worst = first_order_residual(game.as_ref(), &c.point)?;
            for _ in 0..1000 {
                if let Some(z) = space.sample_tangent(&c.point, &mut rng)? {
                    worst = worst.max(dot(&v, &z) / norm2(&z));
                }
            }
            out.push(PropertyOutcome::new(
                format!("nash-residual {} {method:?}", game.name()),
                1000,
                tol.nash - worst,
                0.0,
            ));
        }
    }
    Ok(out)
}

fn noise() -> Result<Vec<PropertyOutcome>> {
    const DRAWS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut out = Vec::new();
    let cournot = Cournot::symmetric(3, 5.0, 1.0, 1.0, 10.0)?;
    let x = [0.3, 2.0, 7.5];
    let v0 = cournot.gradient_field(&x)?;
    let sigma = 1.5;
    let root = (DRAWS as f64).sqrt();
    let mut scratch = Vec::new();
    for (label, model) in [
        ("gaussian", NoiseModel::GaussianIid { sigma }),
        ("uniform", NoiseModel::UniformBounded { sigma }),
        ("state-scaled", NoiseModel::StateScaled { sigma }),
    ] {
        let mut mean = vec![0.0; 3];
        let (mut m2, mut m4) = (0.0, 0.0);
        let mut v = v0.clone();
        for _ in 0..DRAWS {
            v.copy_from_slice(&v0);
            model.observe(&cournot, &x, &mut v, &mut scratch, &mut rng)?;
            let sq: f64 = v.iter().zip(&v0).map(|(a, b)| (a - b) * (a - b)).sum();
            for k in 0..3 {
                mean[k] += (v[k] - v0[k]) / DRAWS as f64;
            }
            m2 += sq / DRAWS as f64;
            m4 += sq * sq / DRAWS as f64;
        }
        let mean_slack = mean.iter().map(|m| 4.0 * sigma / root - m.abs()).fold(f64::INFINITY, f64::min);
        let ci = 4.0 * ((m4 - m2 * m2).max(0.0) / DRAWS as f64).sqrt();
        out.push(PropertyOutcome::new(format!("unbiased {label}"), DRAWS, mean_slack, 0.0));
        out.push(PropertyOutcome::new(format!("second-moment {label}"), DRAWS, sigma * sigma + ci - m2, 0.0));
    }

    let finite = FiniteGame::from_fn(vec![2, 3], |i, p| (i as f64 + 1.0) * (p[0] as f64 - 2.0 * p[1] as f64 + 0.5))?;
    let xf = [0.3, 0.7, 0.2, 0.5, 0.3];
    let exact = finite.gradient_field(&xf)?;
    let mut mean = vec![0.0; 5];
    let mut v = vec![0.0; 5];
    let model = NoiseModel::FiniteGameSampling { extra_sigma: 0.0 };
    for _ in 0..DRAWS {
        model.observe(&finite, &xf, &mut v, &mut scratch, &mut rng)?;
        for k in 0..5 {
            mean[k] += v[k] / DRAWS as f64;
        }
    }
    let tol = 4.0 * finite.payoff_range() / root;
    let slack = mean.iter().zip(&exact).map(|(m, e)| tol - (m - e).abs()).fold(f64::INFINITY, f64::min);
    out.push(PropertyOutcome::new("unbiased action-sampling", DRAWS, slack, 0.0));
    Ok(out)
}

fn descent() -> Result<Vec<PropertyOutcome>> {
    let cournot = Cournot::symmetric(3, 5.0, 1.0, 1.0, 10.0)?;
    let dominant =
        FiniteGame::bimatrix(&[vec![3.0, 0.0], vec![4.0, 1.0]], &[vec![3.0, 4.0], vec![0.0, 1.0]])?;
    let pennies = BilinearZeroSum::matching_pennies();
    let nonconcave = NonConcaveStable::new(2)?;
    let euclid = RegularizerKind::Euclidean;
    let entropic = RegularizerKind::Entropic;
    type Case<'a> = (&'a str, &'a dyn Game<f64>, RegularizerKind, Vec<f64>, NoiseModel<f64>);
    let cases: Vec<Case> = vec![
        ("cournot euclidean", &cournot, euclid, vec![1.0; 3], NoiseModel::GaussianIid { sigma: 1.0 }),
        ("finite entropic", &dominant, entropic, vec![0.0, 1.0, 0.0, 1.0], NoiseModel::FiniteGameSampling { extra_sigma: 0.5 }),
        ("finite euclidean", &dominant, euclid, vec![0.0, 1.0, 0.0, 1.0], NoiseModel::FiniteGameSampling { extra_sigma: 0.0 }),
        ("bilinear entropic", &pennies, entropic, vec![0.5; 4], NoiseModel::UniformBounded { sigma: 1.0 }),
        ("nonconcave euclidean", &nonconcave, euclid, vec![0.0; 2], NoiseModel::StateScaled { sigma: 1.0 }),
    ];
    let mut out = Vec::new();
    for (label, game, kind, p, noise) in cases {
        let reg = ProductRegularizer::uniform(game.action_space().clone(), kind)?;
        let mut config = RunConfig::new(5_000, StepPolicy::Power { initial: 1.0, exponent: 0.6 }, noise);
        config.record_stride = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
        let traj = run(game, &reg, &config, &mut rng)?;
        let k = reg.strong_convexity();
        let mut slack = f64::INFINITY;
        for (idx, r) in traj.records.iter().enumerate() {
            let next = traj.records.get(idx + 1).map_or(&traj.final_scores, |n| &n.scores);
            let diff: Vec<f64> = r.action.iter().zip(&p).map(|(a, b)| a - b).collect();
            let rhs = reg.fenchel(&p, &r.scores)?
                + r.gamma * dot(&r.feedback, &diff)
                + r.gamma * r.gamma / (2.0 * k) * reg.dual_norm(&r.feedback).powi(2);
            slack = slack.min(rhs - reg.fenchel(&p, next)?);
        }
        out.push(PropertyOutcome::new(format!("descent {label}"), traj.records.len(), slack, 1e-9));
    }
    Ok(out)
}

/// Worst deviation between the centred difference of `F(p, y(t))` and
/// `<v(x(t)), x(t) - p>`, and the worst increase of `F` between samples.
pub fn lyapunov_errors<G: Game<f64> + ?Sized>(
    game: &G,
    reg: &ProductRegularizer<f64>,
    y0: &[f64],
    p: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let path = continuous_reference(game, reg, y0, horizon, dt, &[p.to_vec()])?;
    let f = &path.fenchel[0];
    let mut identity = 0.0f64;
    let mut increase = f64::NEG_INFINITY;
    for k in 1..f.len() - 1 {
        let derivative = (f[k + 1] - f[k - 1]) / (2.0 * dt);
        let x = &path.actions[k];
        let v = game.gradient_field(x)?;
        let diff: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        identity = identity.max((derivative - dot(&v, &diff)).abs());
    }
    for w in f.windows(2) {
        increase = increase.max(w[1] - w[0]);
    }
    Ok((identity, increase))
}

fn lyapunov() -> Result<Vec<PropertyOutcome>> {
    let mut out = Vec::new();
    let cournot = Cournot::symmetric(3, 5.0, 1.0, 1.0, 10.0)?;
    let reg = ProductRegularizer::uniform(cournot.action_space().clone(), RegularizerKind::Euclidean)?;
    let (identity, increase) = lyapunov_errors(&cournot, &reg, &[1.6, 0.6, 1.3], &[1.0; 3], 50.0, 1e-3)?;
    let samples = 50_000;
    out.push(PropertyOutcome::new("lyapunov-identity cournot", samples, 1e-4 - identity, 0.0));
    out.push(PropertyOutcome::new("lyapunov-nonincreasing cournot", samples, -increase, 1e-10));

    let pennies = BilinearZeroSum::matching_pennies();
    let reg = ProductRegularizer::uniform(pennies.action_space().clone(), RegularizerKind::Entropic)?;
    let (identity, _) = lyapunov_errors(&pennies, &reg, &[0.3, 0.0, 0.0, 0.2], &[0.5; 4], 20.0, 1e-3)?;
    out.push(PropertyOutcome::new("lyapunov-identity pennies", 20_000, 1e-4 - identity, 0.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for name in ["fenchel", "gradients", "cones", "noise", "descent", "lyapunov"] {
            let report = run_suite(name).unwrap();
            assert!(report.passed(), "{name}:\n{report}");
            assert!(!report.properties.is_empty());
        }
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        assert!(matches!(run_suite("unknown"), Err(Error::Usage(_))));
    }
}
