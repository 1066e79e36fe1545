//! Certification and measurement: Hessian stability tests, sampled
//! monotonicity and variational-stability checks, Nash oracles for small
//! instances, the equilibrium gap, and the finite-game classifiers.
//!
//! Sampled checks are semidecision procedures: a reported violation is a
//! genuine counterexample, a pass only means none was found.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::games::{FiniteGame, Game};
use crate::geometry::{ProductSet, SetKind};
use crate::scalar::{dist2, dot, norm2, Scalar};

/// Numerical thresholds for the certification routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    pub eig: T,
    pub nash: T,
    pub sharp: T,
    pub strict: T,
    pub cone: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            eig: T::lit(1e-8),
            nash: T::lit(1e-6),
            sharp: T::lit(1e-8),
            strict: T::lit(1e-8),
            cone: T::default_tol(),
        }
    }
}

fn to_f64<T: Scalar>(m: &DMatrix<T>) -> DMatrix<f64> {
    m.map(|v| v.as_f64())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// `z^T M z < -tol ||z||^2` for every nonzero `z`.
pub fn is_negative_definite(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    let shifted = -m - DMatrix::identity(n, n) * tol;
    shifted.cholesky().is_some()
}

/// Orthonormal basis (columns) of the linear span of the tangent cone.
///
/// For a box this is every coordinate with a nondegenerate range; for a
/// simplex it is the sum-zero subspace, at any point.
pub fn tangent_span_basis<T: Scalar>(space: &ProductSet<T>) -> DMatrix<f64> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, set) in space.factors().iter().enumerate() {
        let off = space.offset(i);
        match set.kind() {
            SetKind::Box { lower, upper } => {
                for k in 0..lower.len() {
                    if upper[k] - lower[k] > set.tolerance() {
                        let mut c = vec![0.0; space.dim()];
                        c[off + k] = 1.0;
                        columns.push(c);
                    }
                }
            }
            SetKind::ScaledSimplex { dim, .. } => {
                // Helmert contrasts
                for m in 1..*dim {
                    let mut c = vec![0.0; space.dim()];
                    let norm = ((m * (m + 1)) as f64).sqrt();
                    for l in 0..m {
                        c[off + l] = 1.0 / norm;
                    }
                    c[off + m] = -(m as f64) / norm;
                    columns.push(c);
                }
            }
        }
    }
    let d = space.dim();
    DMatrix::from_fn(d, columns.len(), |r, c| columns[c][r])
}

/// Whether the game Hessian at `x` is negative definite on the span of the
/// tangent cone (which implies negative definiteness on the cone itself).
pub fn hessian_stability_test<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: &[T], tol: T) -> Result<bool> {
    let h = to_f64(&game.hessian(x)?);
    let basis = tangent_span_basis(game.action_space());
    if basis.ncols() == 0 {
        return Ok(true);
    }
    let reduced = basis.transpose() * h * &basis;
    Ok(is_negative_definite(&reduced, tol.as_f64()))
}

/// `L = -lambda_max(H)` on the tangent span, when the Hessian is constant and
/// negative definite there; the strong-stability modulus of affine games.
pub fn hessian_curvature_bound<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: &[T]) -> Result<f64> {
    let h = to_f64(&game.hessian(x)?);
    let basis = tangent_span_basis(game.action_space());
    let reduced = basis.transpose() * h * &basis;
    Ok(-max_eigenvalue(&reduced))
}

/// `<v(x') - v(x), x' - x>`; nonpositive for every pair in a monotone game.
pub fn monotonicity_pairing<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: &[T], x_prime: &[T]) -> Result<T> {
    let v = game.gradient_field(x)?;
    let vp = game.gradient_field(x_prime)?;
    Ok(v.iter()
        .zip(&vp)
        .zip(x.iter().zip(x_prime))
        .map(|((&a, &b), (&p, &q))| (b - a) * (q - p))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    /// No sampled pair had a positive pairing (beyond the cone tolerance).
    pub monotone: bool,
    /// Every sampled pair satisfied the strict inequality.
    pub strictly_monotone: bool,
    pub worst: T,
    /// A pair `(x, x')` attaining `worst`, recorded when it is a violation.
    pub witness: Option<(Vec<T>, Vec<T>)>,
    pub samples: usize,
}

pub fn monotonicity_check<T: Scalar, G: Game<T> + ?Sized, R: Rng + ?Sized>(
    game: &G,
    samples: usize,
    tol: &Tolerances<T>,
    rng: &mut R,
) -> Result<StabilityReport<T>> {
    if samples == 0 {
        return Err(Error::Usage("monotonicity check needs at least one sample".into()));
    }
    let space = game.action_space();
    let mut worst = T::neg_infinity();
    let mut worst_pair = None;
    let mut strict = true;
    for s in 0..samples {
        let (x, xp) = if s % 2 == 0 {
            (space.sample(rng), space.sample(rng))
        } else {
            (space.sample_with_faces(rng), space.sample_with_faces(rng))
        };
        let pairing = monotonicity_pairing(game, &x, &xp)?;
        let d = dist2(&x, &xp);
        if d > tol.cone && pairing >= -tol.strict * d * d {
            strict = false;
        }
        if pairing > worst {
            worst = pairing;
            worst_pair = Some((x, xp));
        }
    }
    let monotone = worst <= tol.cone;
    Ok(StabilityReport {
        monotone,
        strictly_monotone: strict && monotone,
        worst,
        witness: if monotone { None } else { worst_pair },
        samples,
    })
}

/// Where to look for violations of variational stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region<T> {
    Global,
    /// Euclidean ball of this radius around the candidate.
    Radius(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport<T> {
    pub stable: bool,
    /// Largest `<v(x), x - x*> + tau_strict * |x - x*|^2` seen.
    pub worst: T,
    pub witness: Option<Vec<T>>,
}

/// Samples `x` in the region and checks `<v(x), x - x*> <= 0`, strictly
/// (below `-tau_strict * |x - x*|^2`) away from `x*`.
pub fn variational_stability_check<T: Scalar, G: Game<T> + ?Sized, R: Rng + ?Sized>(
    game: &G,
    x_star: &[T],
    samples: usize,
    region: Region<T>,
    tol: &Tolerances<T>,
    rng: &mut R,
) -> Result<VariationalReport<T>> {
    let space = game.action_space();
    space.require_feasible(x_star)?;
    let mut worst = T::neg_infinity();
    let mut witness = None;
    for s in 0..samples {
        let raw = if s % 2 == 0 { space.sample(rng) } else { space.sample_with_faces(rng) };
        let x = match region {
            Region::Global => raw,
            Region::Radius(r) => {
                let d = dist2(&raw, x_star);
                if d <= T::zero() {
                    raw
                } else {
                    let u = T::lit(rng.random::<f64>()).powf(T::one() / T::count(space.dim()));
                    let t = (r * u / d).min(T::one());
                    x_star.iter().zip(&raw).map(|(&a, &b)| a + t * (b - a)).collect()
                }
            }
        };
        let d = dist2(&x, x_star);
        let v = game.gradient_field(&x)?;
        let pairing: T = v.iter().zip(x.iter().zip(x_star)).map(|(&g, (&a, &b))| g * (a - b)).sum();
        let violated = if d > tol.cone {
            pairing >= -tol.strict * d * d
        } else {
            pairing > tol.cone
        };
        let score = pairing + tol.strict * d * d;
        if score > worst {
            worst = score;
        }
        if violated && witness.is_none() {
            witness = Some(x);
        }
    }
    Ok(VariationalReport { stable: witness.is_none(), worst, witness })
}

/// `min_{x* in X*} <v(x), x* - x>`.
pub fn equilibrium_gap<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: &[T], candidates: &[Vec<T>]) -> Result<T> {
    if candidates.is_empty() {
        return Err(Error::Usage("equilibrium gap over an empty set".into()));
    }
    let v = game.gradient_field(x)?;
    Ok(gap_from_gradient(&v, x, candidates))
}

pub(crate) fn gap_from_gradient<T: Scalar>(v: &[T], x: &[T], candidates: &[Vec<T>]) -> T {
    candidates
        .iter()
        .map(|c| v.iter().zip(c.iter().zip(x)).map(|(&g, (&p, &q))| g * (p - q)).sum::<T>())
        .fold(T::infinity(), |a, b| a.min(b))
}

/// First-order Nash residual `max(0, max_z <v(x), z>)` over unit tangent
/// generators `z`; zero exactly when `v(x)` lies in the polar cone.
pub fn first_order_residual<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: &[T]) -> Result<T> {
    let v = game.gradient_field(x)?;
    let rays = game.action_space().tangent_generators(x)?;
    Ok(rays.iter().map(|z| dot(&v, z)).fold(T::zero(), |a, b| a.max(b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    ClosedForm,
    BestResponseGrid,
    FixedPointProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    InteriorFirstOrder,
    Vertex,
    Supplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCandidate<T> {
    pub point: Vec<T>,
    pub kind: CandidateKind,
    pub residual: T,
}

fn is_vertex<T: Scalar>(space: &ProductSet<T>, x: &[T]) -> bool {
    space.factors().iter().enumerate().all(|(i, set)| {
        let xi = space.block(x, i);
        let tol = set.tolerance();
        match set.kind() {
            SetKind::Box { lower, upper } => (0..xi.len())
                .all(|k| (xi[k] - lower[k]).abs() <= tol || (xi[k] - upper[k]).abs() <= tol),
            SetKind::ScaledSimplex { .. } => xi.iter().filter(|&&v| v > tol).count() == 1,
        }
    })
}

/// Wraps a user-supplied point as a candidate, computing its residual.
pub fn supplied_candidate<T: Scalar, G: Game<T> + ?Sized>(game: &G, x: Vec<T>) -> Result<EquilibriumCandidate<T>> {
    let residual = first_order_residual(game, &x)?;
    Ok(EquilibriumCandidate { point: x, kind: CandidateKind::Supplied, residual })
}

/// Computes an equilibrium candidate whose first-order residual is at most
/// `tol.nash`, or reports failure with the best residual reached.
pub fn nash_oracle<T: Scalar, G: Game<T> + ?Sized>(
    game: &G,
    method: OracleMethod,
    tol: &Tolerances<T>,
) -> Result<EquilibriumCandidate<T>> {
    let (point, iterations) = match method {
        OracleMethod::ClosedForm => (
            game.closed_form_equilibrium()
                .ok_or(Error::NotImplemented("closed-form equilibrium"))?,
            0,
        ),
        OracleMethod::BestResponseGrid => best_response_grid(game, tol)?,
        OracleMethod::FixedPointProjection => fixed_point_projection(game, tol)?,
    };
    let residual = first_order_residual(game, &point)?;
    if residual > tol.nash {
        return Err(Error::OracleFailure { iterations, residual: residual.as_f64() });
    }
    let kind = if is_vertex(game.action_space(), &point) {
        CandidateKind::Vertex
    } else {
        CandidateKind::InteriorFirstOrder
    };
    Ok(EquilibriumCandidate { point, kind, residual })
}

fn centre<T: Scalar>(space: &ProductSet<T>) -> Vec<T> {
    let mut x = Vec::with_capacity(space.dim());
    for set in space.factors() {
        match set.kind() {
            SetKind::Box { lower, upper } => {
                x.extend(lower.iter().zip(upper).map(|(&l, &u)| (l + u) / T::lit(2.0)))
            }
            SetKind::ScaledSimplex { scale, dim } => x.extend(vec![*scale / T::count(*dim); *dim]),
        }
    }
    x
}

/// Gauss-Seidel best responses, each found by a 1-D grid search along
/// coordinates (boxes) or pairwise mass transfers (simplices), with the
/// search window shrunk tenfold between rounds.
fn best_response_grid<T: Scalar, G: Game<T> + ?Sized>(game: &G, tol: &Tolerances<T>) -> Result<(Vec<T>, usize)> {
    const GRID: usize = 21;
    const ROUNDS: usize = 14;
    const SWEEPS: usize = 500;
    let space = game.action_space();
    if space.dim() > 6 {
        return Err(Error::Usage("best-response grid oracle supports joint dimension <= 6".into()));
    }
    let mut x = centre(space);
    let mut window = T::one();
    let mut iterations = 0;
    let mut residual = T::infinity();
    for _ in 0..ROUNDS {
        let mut settled = false;
        for _ in 0..SWEEPS {
            iterations += 1;
            let mut moved = false;
            for i in 0..space.players() {
                let set = space.factor(i);
                let range = space.range(i);
                let lines: Vec<(usize, Option<usize>)> = match set.kind() {
                    SetKind::Box { .. } => range.clone().map(|k| (k, None)).collect(),
                    SetKind::ScaledSimplex { .. } => range
                        .clone()
                        .flat_map(|j| range.clone().filter(move |&k| k != j).map(move |k| (j, Some(k))))
                        .collect(),
                };
                for (j, k) in lines {
                    let width = window * set.extent();
                    let mut best = (game.payoff_unchecked(i, &x), x.clone());
                    for g in 0..GRID {
                        let step = width * (T::lit(2.0) * T::count(g) / T::count(GRID - 1) - T::one());
                        let mut trial = x.clone();
                        trial[j] += step;
                        if let Some(k) = k {
                            trial[k] -= step;
                        }
                        let local = set.project(&trial[range.clone()])?;
                        trial[range.clone()].copy_from_slice(&local);
                        let value = game.payoff_unchecked(i, &trial);
                        if value > best.0 {
                            best = (value, trial);
                        }
                    }
                    if best.1 != x {
                        moved = true;
                        x = best.1;
                    }
                }
            }
            if !moved {
                settled = true;
                break;
            }
        }
        if !settled {
            return Err(Error::OracleFailure {
                iterations,
                residual: first_order_residual(game, &x)?.as_f64(),
            });
        }
        residual = first_order_residual(game, &x)?;
        if residual <= tol.nash {
            return Ok((x, iterations));
        }
        window = window / T::lit(10.0);
    }
    Err(Error::OracleFailure { iterations, residual: residual.as_f64() })
}

/// Sampled Lipschitz estimate of the gradient field.
fn lipschitz_estimate<T: Scalar, G: Game<T> + ?Sized>(game: &G) -> Result<T> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x11f5);
    let space = game.action_space();
    let mut best = T::zero();
    for _ in 0..400 {
        let x = space.sample(&mut rng);
        let y = space.sample(&mut rng);
        let d = dist2(&x, &y);
        if d <= T::epsilon() {
            continue;
        }
        let dv = dist2(&game.gradient_field(&x)?, &game.gradient_field(&y)?);
        best = best.max(dv / d);
    }
    Ok((best * T::lit(1.1)).max(T::lit(1e-6)))
}

/// Projected fixed-point iteration `x <- P(x + eta v(x))` with
/// `eta = 1 / (2 L)`.
fn fixed_point_projection<T: Scalar, G: Game<T> + ?Sized>(game: &G, tol: &Tolerances<T>) -> Result<(Vec<T>, usize)> {
    const MAX_ITER: usize = 1_000_000;
    let space = game.action_space();
    let eta = T::one() / (T::lit(2.0) * lipschitz_estimate(game)?);
    let mut x = centre(space);
    let mut v = vec![T::zero(); x.len()];
    for it in 1..=MAX_ITER {
        game.gradient_into(&x, &mut v);
        let step: Vec<T> = x.iter().zip(&v).map(|(&a, &g)| a + eta * g).collect();
        let next = space.project(&step)?;
        let moved = dist2(&next, &x);
        x = next;
        if moved <= T::epsilon() * T::lit(16.0) || it % 64 == 0 {
            let r = first_order_residual(game, &x)?;
            if r <= tol.nash / T::lit(10.0) || moved == T::zero() {
                return Ok((x, it));
            }
        }
    }
    Ok((x, MAX_ITER))
}

/// `alpha` is strictly dominated by `beta` for `player`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domination {
    pub player: usize,
    pub strategy: usize,
    pub dominator: usize,
}

/// Every pair `alpha < beta` with `u_i(alpha; a_-i) < u_i(beta; a_-i)` for
/// all pure opponent profiles (equivalently, all mixed ones).
pub fn dominated_strategies<T: Scalar>(game: &FiniteGame<T>) -> Vec<Domination> {
    let mut found = Vec::new();
    for (player, &k) in game.strategies().iter().enumerate() {
        for strategy in 0..k {
            for dominator in (0..k).filter(|&b| b != strategy) {
                let dominated = game.profiles().filter(|p| p[player] == strategy).all(|p| {
                    let mut q = p.clone();
                    q[player] = dominator;
                    game.pure_payoff(player, &p) < game.pure_payoff(player, &q)
                });
                if dominated {
                    found.push(Domination { player, strategy, dominator });
                }
            }
        }
    }
    found
}

/// Whether every unilateral pure deviation from `profile` strictly loses.
pub fn strict_equilibrium_check<T: Scalar>(game: &FiniteGame<T>, profile: &[usize]) -> Result<bool> {
    check_dim(game.strategies().len(), profile.len())?;
    if profile.iter().zip(game.strategies()).any(|(&a, &k)| a >= k) {
        return Err(Error::Usage(format!("profile {profile:?} out of range")));
    }
    Ok(game.strategies().iter().enumerate().all(|(i, &k)| {
        let base = game.pure_payoff(i, profile);
        (0..k).filter(|&b| b != profile[i]).all(|b| {
            let mut dev = profile.to_vec();
            dev[i] = b;
            game.pure_payoff(i, &dev) < base
        })
    }))
}

/// Whether `<v(x*), z> < -tau_sharp |z|` on every tangent generator and on
/// `ray_samples` random tangent directions. Points whose tangent cone
/// contains a line (interior points among them) are never sharp.
pub fn sharp_equilibrium_check<T: Scalar, G: Game<T> + ?Sized, R: Rng + ?Sized>(
    game: &G,
    x_star: &[T],
    ray_samples: usize,
    tol: &Tolerances<T>,
    rng: &mut R,
) -> Result<bool> {
    let space = game.action_space();
    let v = game.gradient_field(x_star)?;
    let rays = space.tangent_generators(x_star)?;
    if rays.iter().any(|z| dot(&v, z) >= -tol.sharp) {
        return Ok(false);
    }
    for _ in 0..ray_samples {
        if let Some(z) = space.sample_tangent(x_star, rng)? {
            if dot(&v, &z) >= -tol.sharp * norm2(&z) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Fraction of `samples` draws of `b ~ U[0,1]^n` for which the Cournot game
/// Hessian is negative definite. With `symmetric`, one draw is shared by all
/// firms.
pub fn cournot_hessian_fraction<R: Rng + ?Sized>(firms: usize, samples: usize, symmetric: bool, rng: &mut R) -> f64 {
    let mut hits = 0usize;
    for _ in 0..samples {
        let b: Vec<f64> = if symmetric {
            vec![rng.random::<f64>(); firms]
        } else {
            (0..firms).map(|_| rng.random::<f64>()).collect()
        };
        let h = crate::games::Cournot::<f64>::hessian_matrix(&b);
        if is_negative_definite(&h, 0.0) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}
