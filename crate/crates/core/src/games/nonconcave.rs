use nalgebra::DMatrix;

use super::Game;
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::scalar::Scalar;

/// Single-player game `u(x) = 1 - sum_l sqrt(1 + x_l)` on `[0, 1]^d`.
///
/// The origin is the unique maximizer and is globally variationally stable,
/// yet for `d >= 2` the payoff is not pseudo-concave, so the game is not
/// monotone.
#[derive(Debug, Clone)]
pub struct NonConcaveStable<T> {
    space: ProductSet<T>,
}

impl<T: Scalar> NonConcaveStable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("dimension must be positive".into()));
        }
        let space = ProductSet::new(vec![ConvexSet::cube(T::zero(), T::one(), dim)?])?;
        Ok(Self { space })
    }
}

impl<T: Scalar> Game<T> for NonConcaveStable<T> {
    fn name(&self) -> &str {
        "nonconcave"
    }

    fn action_space(&self) -> &ProductSet<T> {
        &self.space
    }

    fn payoff_unchecked(&self, _player: usize, x: &[T]) -> T {
        T::one() - x.iter().map(|&v| (T::one() + v).sqrt()).sum::<T>()
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let two = T::lit(2.0);
        for (o, &v) in out.iter_mut().zip(x) {
            *o = -T::one() / (two * (T::one() + v).sqrt());
        }
    }

    fn hessian_unchecked(&self, x: &[T]) -> Option<DMatrix<T>> {
        let quarter = T::lit(0.25);
        let d = x.len();
        Some(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                quarter * (T::one() + x[i]).powf(T::lit(-1.5))
            } else {
                T::zero()
            }
        }))
    }

    fn gradient_sup(&self) -> Vec<T> {
        vec![T::lit(0.5) * T::count(self.space.dim()).sqrt()]
    }

    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        Some(vec![T::zero(); self.space.dim()])
    }
}
