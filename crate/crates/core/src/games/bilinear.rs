use nalgebra::DMatrix;

use super::{FiniteGame, Game};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::scalar::Scalar;

/// Two-player zero-sum game `u_A = x_A^T M x_B = -u_B`.
///
/// On unit simplices this is the mixed extension of a matrix game; on boxes
/// it is a continuous bilinear saddle problem.
#[derive(Debug, Clone)]
pub struct BilinearZeroSum<T> {
    matrix: Vec<Vec<T>>,
    space: ProductSet<T>,
    on_simplices: bool,
}

impl<T: Scalar> BilinearZeroSum<T> {
    pub fn new(matrix: Vec<Vec<T>>, set_a: ConvexSet<T>, set_b: ConvexSet<T>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::Usage("payoff matrix must be a nonempty rectangle".into()));
        }
        check_dim(rows, set_a.dim())?;
        check_dim(cols, set_b.dim())?;
        let on_simplices = set_a.simplex_scale() == Some(T::one()) && set_b.simplex_scale() == Some(T::one());
        let space = ProductSet::new(vec![set_a, set_b])?;
        Ok(Self { matrix, space, on_simplices })
    }

    /// Matrix game over the players' mixed strategies.
    pub fn matrix_game(matrix: Vec<Vec<T>>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        Self::new(matrix, ConvexSet::unit_simplex(rows)?, ConvexSet::unit_simplex(cols)?)
    }

    /// Matching pennies, `M = [[1, -1], [-1, 1]]`.
    pub fn matching_pennies() -> Self {
        let one = T::one();
        Self::matrix_game(vec![vec![one, -one], vec![-one, one]]).expect("valid matrix")
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.matrix
    }

    /// The underlying finite game, when both sets are unit simplices.
    pub fn to_finite_game(&self) -> Option<FiniteGame<T>> {
        if !self.on_simplices {
            return None;
        }
        let neg: Vec<Vec<T>> = self.matrix.iter().map(|r| r.iter().map(|&v| -v).collect()).collect();
        FiniteGame::bimatrix(&self.matrix, &neg).ok()
    }
}

impl<T: Scalar> Game<T> for BilinearZeroSum<T> {
    fn name(&self) -> &str {
        "bilinear"
    }

    fn action_space(&self) -> &ProductSet<T> {
        &self.space
    }

    fn payoff_unchecked(&self, player: usize, x: &[T]) -> T {
        let xa = self.space.block(x, 0);
        let xb = self.space.block(x, 1);
        let value: T = self
            .matrix
            .iter()
            .zip(xa)
            .map(|(row, &a)| a * row.iter().zip(xb).map(|(&m, &b)| m * b).sum::<T>())
            .sum();
        if player == 0 {
            value
        } else {
            -value
        }
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let rows = self.matrix.len();
        let xa = &x[..rows];
        let xb = &x[rows..];
        for (i, row) in self.matrix.iter().enumerate() {
            out[i] = row.iter().zip(xb).map(|(&m, &b)| m * b).sum();
        }
        for j in 0..xb.len() {
            out[rows + j] = -self.matrix.iter().zip(xa).map(|(row, &a)| row[j] * a).sum::<T>();
        }
    }

    fn hessian_unchecked(&self, _x: &[T]) -> Option<DMatrix<T>> {
        // off-diagonal blocks: (M + (-M^T)^T) / 2
        let rows = self.matrix.len();
        let d = self.space.dim();
        let half = T::lit(0.5);
        let mut h = DMatrix::zeros(d, d);
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                let from_b = -m;
                h[(i, rows + j)] = half * m + half * from_b;
                h[(rows + j, i)] = half * from_b + half * m;
            }
        }
        Some(h)
    }

    fn gradient_sup(&self) -> Vec<T> {
        let bound_a = self.space.factor(1).max_norm();
        let bound_b = self.space.factor(0).max_norm();
        let frob: T = self.matrix.iter().flatten().map(|&m| m * m).sum::<T>().sqrt();
        vec![frob * bound_a, frob * bound_b]
    }

    fn pure_payoff_vectors(&self, profile: &[usize]) -> Option<Vec<T>> {
        if !self.on_simplices {
            return None;
        }
        let (a, b) = (profile[0], profile[1]);
        let mut out: Vec<T> = self.matrix.iter().map(|row| row[b]).collect();
        out.extend(self.matrix[a].iter().map(|&m| -m));
        Some(out)
    }

    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        self.to_finite_game()?.closed_form_equilibrium()
    }
}
