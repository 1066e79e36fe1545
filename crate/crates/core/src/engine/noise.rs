use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::games::Game;
use crate::scalar::Scalar;

/// Feedback model: how the observed `v_hat = v(X) + xi` is generated.
///
/// Additive kinds are scaled so that `E|xi|_2^2 = sigma^2` (Gaussian and
/// uniform) or `<= sigma^2` (state-scaled); since every dual norm used here
/// is dominated by the Euclidean one, the same bound holds for `|xi|_*^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel<T> {
    None,
    /// i.i.d. Gaussian coordinates with standard deviation `sigma / sqrt(D)`.
    GaussianIid { sigma: T },
    /// i.i.d. uniform coordinates on `[-w, w]`, `w = sigma sqrt(3 / D)`.
    UniformBounded { sigma: T },
    /// `sigma * s(X) * g / sqrt(D)` with `g` standard Gaussian and
    /// `s(X) = 0.75 + 0.25 cos(sum X)`, so errors are not identically
    /// distributed across states.
    StateScaled { sigma: T },
    /// Mixed extensions only: each player draws a pure strategy from its
    /// mixed strategy and observes its full pure payoff vector against the
    /// realized opponent profile, plus optional Gaussian noise as above.
    FiniteGameSampling { extra_sigma: T },
}

impl<T: Scalar> NoiseModel<T> {
    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma >= T::zero() && sigma.is_finite()) {
            return Err(Error::Usage(format!("noise.sigma must be a nonnegative number, got {sigma}")));
        }
        Ok(())
    }

    /// Declared bound on the root-mean-square of the additive part.
    pub fn sigma(&self) -> T {
        match *self {
            NoiseModel::None => T::zero(),
            NoiseModel::GaussianIid { sigma }
            | NoiseModel::UniformBounded { sigma }
            | NoiseModel::StateScaled { sigma } => sigma,
            NoiseModel::FiniteGameSampling { extra_sigma } => extra_sigma,
        }
    }

    pub fn requires_pure_payoffs(&self) -> bool {
        matches!(self, NoiseModel::FiniteGameSampling { .. })
    }

    /// Overwrites `v` (holding `v(x)` for additive kinds) with a sampled
    /// payoff estimate at `x`.
    pub fn observe<G, R>(&self, game: &G, x: &[T], v: &mut [T], scratch: &mut Vec<usize>, rng: &mut R) -> Result<()>
    where
        G: Game<T> + ?Sized,
        R: Rng + ?Sized,
    {
        let d = v.len();
        match *self {
            NoiseModel::None => {}
            NoiseModel::GaussianIid { sigma } => add_gaussian(v, sigma, T::one(), rng),
            NoiseModel::UniformBounded { sigma } => {
                let w = sigma * (T::lit(3.0) / T::count(d)).sqrt();
                for c in v.iter_mut() {
                    *c += w * T::lit(rng.random_range(-1.0..=1.0));
                }
            }
            NoiseModel::StateScaled { sigma } => add_gaussian(v, sigma, state_scale(x), rng),
            NoiseModel::FiniteGameSampling { extra_sigma } => {
                let space = game.action_space();
                scratch.clear();
                for i in 0..space.players() {
                    scratch.push(sample_categorical(space.block(x, i), rng));
                }
                let pure = game
                    .pure_payoff_vectors(scratch)
                    .ok_or(Error::Usage("action sampling requires a finite game".into()))?;
                v.copy_from_slice(&pure);
                if extra_sigma > T::zero() {
                    add_gaussian(v, extra_sigma, T::one(), rng);
                }
            }
        }
        Ok(())
    }
}

/// `0.75 + 0.25 cos(sum x)`, in `[1/2, 1]`.
pub fn state_scale<T: Scalar>(x: &[T]) -> T {
    let s: T = x.iter().copied().sum();
    T::lit(0.75) + T::lit(0.25) * s.cos()
}

fn add_gaussian<T: Scalar, R: Rng + ?Sized>(v: &mut [T], sigma: T, scale: T, rng: &mut R) {
    let sd = sigma * scale / T::count(v.len()).sqrt();
    for c in v.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *c += sd * T::lit(g);
    }
}

/// Index drawn with probability proportional to `weights` (inverse CDF).
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total: T = weights.iter().copied().sum();
    let u = T::lit(rng.random::<f64>()) * total;
    let mut acc = T::zero();
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}
