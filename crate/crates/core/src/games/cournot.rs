use nalgebra::DMatrix;

use super::Game;
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::scalar::Scalar;

/// Cournot oligopoly with linear inverse demand `P(x) = a - sum_j b_j x_j`.
///
/// Firm `i` earns `u_i(x) = x_i P(x) - c_i x_i` on `x_i in [0, C_i]`.
#[derive(Debug, Clone)]
pub struct Cournot<T> {
    a: T,
    b: Vec<T>,
    c: Vec<T>,
    capacity: Vec<T>,
    space: ProductSet<T>,
}

impl<T: Scalar> Cournot<T> {
    pub fn new(a: T, b: Vec<T>, c: Vec<T>, capacity: Vec<T>) -> Result<Self> {
        let n = b.len();
        if n == 0 || c.len() != n || capacity.len() != n {
            return Err(Error::Usage("Cournot parameters need one entry per firm".into()));
        }
        if !(a > T::zero()) {
            return Err(Error::Usage("Cournot intercept a must be positive".into()));
        }
        if b.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::Usage("Cournot slopes b_i must be positive".into()));
        }
        if capacity.iter().any(|&v| !(v > T::zero())) {
            return Err(Error::Usage("Cournot capacities must be positive".into()));
        }
        let factors = capacity
            .iter()
            .map(|&cap| ConvexSet::new_box(vec![T::zero()], vec![cap]))
            .collect::<Result<Vec<_>>>()?;
        let space = ProductSet::new(factors)?;
        Ok(Self { a, b, c, capacity, space })
    }

    pub fn symmetric(firms: usize, a: T, b: T, c: T, capacity: T) -> Result<Self> {
        Self::new(a, vec![b; firms], vec![c; firms], vec![capacity; firms])
    }

    pub fn slopes(&self) -> &[T] {
        &self.b
    }

    fn is_symmetric(&self) -> bool {
        self.b.iter().all(|&v| v == self.b[0])
            && self.c.iter().all(|&v| v == self.c[0])
            && self.capacity.iter().all(|&v| v == self.capacity[0])
    }

    /// The constant game Hessian `H_ij = -b_i d_ij - (b_i + b_j) / 2`.
    pub fn hessian_matrix(b: &[T]) -> DMatrix<T> {
        let half = T::lit(0.5);
        DMatrix::from_fn(b.len(), b.len(), |i, j| {
            let diag = if i == j { b[i] } else { T::zero() };
            -diag - half * (b[i] + b[j])
        })
    }
}

impl<T: Scalar> Game<T> for Cournot<T> {
    fn name(&self) -> &str {
        "cournot"
    }

    fn action_space(&self) -> &ProductSet<T> {
        &self.space
    }

    fn payoff_unchecked(&self, i: usize, x: &[T]) -> T {
        let supply: T = self.b.iter().zip(x).map(|(&b, &q)| b * q).sum();
        x[i] * (self.a - supply) - self.c[i] * x[i]
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let supply: T = self.b.iter().zip(x).map(|(&b, &q)| b * q).sum();
        for i in 0..x.len() {
            out[i] = self.a - self.c[i] - supply - self.b[i] * x[i];
        }
    }

    fn hessian_unchecked(&self, _x: &[T]) -> Option<DMatrix<T>> {
        Some(Self::hessian_matrix(&self.b))
    }

    fn gradient_sup(&self) -> Vec<T> {
        // v_i is affine and decreasing in every coordinate: extremes at 0 and C
        let full: T = self.b.iter().zip(&self.capacity).map(|(&b, &q)| b * q).sum();
        (0..self.b.len())
            .map(|i| {
                let at_zero = self.a - self.c[i];
                let at_cap = at_zero - full - self.b[i] * self.capacity[i];
                at_zero.abs().max(at_cap.abs())
            })
            .collect()
    }

    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        if !self.is_symmetric() {
            return None;
        }
        let n = T::count(self.b.len());
        let q = (self.a - self.c[0]) / ((n + T::one()) * self.b[0]);
        (q > T::zero() && q <= self.capacity[0]).then(|| vec![q; self.b.len()])
    }
}
