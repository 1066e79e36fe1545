//! Continuous games: payoffs, individual gradient fields and game Hessians.

mod bilinear;
mod congestion;
mod cournot;
mod finite;
mod nonconcave;

pub use bilinear::BilinearZeroSum;
pub use congestion::{CongestionGame, CongestionPlayer, Resource};
pub use cournot::Cournot;
pub use finite::FiniteGame;
pub use nonconcave::NonConcaveStable;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::geometry::ProductSet;
use crate::scalar::Scalar;

/// An N-player game with concave-in-own-action payoffs over a product of
/// compact convex sets.
///
/// Implementors provide the unchecked evaluations; the provided methods
/// validate dimensions and feasibility first.
pub trait Game<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn action_space(&self) -> &ProductSet<T>;

    fn players(&self) -> usize {
        self.action_space().players()
    }

    fn payoff_unchecked(&self, player: usize, x: &[T]) -> T;

    /// Writes `v(x) = (grad_{x_i} u_i(x))_i` into `out`.
    fn gradient_into(&self, x: &[T], out: &mut [T]);

    /// `H_ij = (grad_j grad_i u_i + (grad_i grad_j u_j)^T) / 2`, if the game
    /// has closed-form second derivatives.
    fn hessian_unchecked(&self, _x: &[T]) -> Option<DMatrix<T>> {
        None
    }

    /// Per-player upper bounds on `sup_x ||v_i(x)||_2`.
    fn gradient_sup(&self) -> Vec<T>;

    /// Pure-strategy payoff vectors `(u_i(a_i; profile_{-i}))_{a_i}` for every
    /// player, concatenated. Only mixed extensions of finite games have them.
    fn pure_payoff_vectors(&self, _profile: &[usize]) -> Option<Vec<T>> {
        None
    }

    /// Known closed-form Nash equilibrium, if any.
    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        None
    }

    fn payoff(&self, player: usize, x: &[T]) -> Result<T> {
        if player >= self.players() {
            return Err(Error::Usage(format!("player {player} out of range")));
        }
        self.action_space().require_feasible(x)?;
        Ok(self.payoff_unchecked(player, x))
    }

    fn gradient_field(&self, x: &[T]) -> Result<Vec<T>> {
        self.action_space().require_feasible(x)?;
        let mut v = vec![T::zero(); x.len()];
        self.gradient_into(x, &mut v);
        Ok(v)
    }

    fn hessian(&self, x: &[T]) -> Result<DMatrix<T>> {
        check_dim(self.action_space().dim(), x.len())?;
        self.action_space().require_feasible(x)?;
        self.hessian_unchecked(x)
            .ok_or(Error::NotImplemented("game Hessian"))
    }

    /// `V*` with `E||v_hat||_*^2 <= V*^2`: the squared gradient bound plus the
    /// noise second moment. Valid for L2 and L-infinity dual norms alike.
    fn gradient_bound(&self, noise_sigma: T) -> T {
        let sq: T = self.gradient_sup().iter().map(|&s| s * s).sum();
        (sq + noise_sigma * noise_sigma).sqrt()
    }
}

impl<T: Scalar, G: Game<T> + ?Sized> Game<T> for Box<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn action_space(&self) -> &ProductSet<T> {
        (**self).action_space()
    }
    fn payoff_unchecked(&self, player: usize, x: &[T]) -> T {
        (**self).payoff_unchecked(player, x)
    }
    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        (**self).gradient_into(x, out)
    }
    fn hessian_unchecked(&self, x: &[T]) -> Option<DMatrix<T>> {
        (**self).hessian_unchecked(x)
    }
    fn gradient_sup(&self) -> Vec<T> {
        (**self).gradient_sup()
    }
    fn pure_payoff_vectors(&self, profile: &[usize]) -> Option<Vec<T>> {
        (**self).pure_payoff_vectors(profile)
    }
    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        (**self).closed_form_equilibrium()
    }
}
