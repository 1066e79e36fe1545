use nalgebra::DMatrix;

use super::Game;
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::scalar::Scalar;

/// Mixed extension of a finite normal-form game with a dense payoff tensor.
///
/// Profiles are stored row-major: the last player's strategy varies fastest.
#[derive(Debug, Clone)]
pub struct FiniteGame<T> {
    strategies: Vec<usize>,
    /// `payoffs[i][index(profile)] = u_i(profile)`.
    payoffs: Vec<Vec<T>>,
    strides: Vec<usize>,
    space: ProductSet<T>,
}

impl<T: Scalar> FiniteGame<T> {
    pub fn new(strategies: Vec<usize>, payoffs: Vec<Vec<T>>) -> Result<Self> {
        if strategies.is_empty() || strategies.contains(&0) {
            return Err(Error::Usage("every player needs at least one strategy".into()));
        }
        if payoffs.len() != strategies.len() {
            return Err(Error::Usage("one payoff table per player required".into()));
        }
        let cells: usize = strategies.iter().product();
        if payoffs.iter().any(|t| t.len() != cells) {
            return Err(Error::Usage(format!("payoff tables must have {cells} cells")));
        }
        let mut strides = vec![1; strategies.len()];
        for i in (0..strategies.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * strategies[i + 1];
        }
        let factors = strategies
            .iter()
            .map(|&k| ConvexSet::unit_simplex(k))
            .collect::<Result<Vec<_>>>()?;
        let space = ProductSet::new(factors)?;
        Ok(Self { strategies, payoffs, strides, space })
    }

    /// Builds the tensor from `u(player, profile)`.
    pub fn from_fn(strategies: Vec<usize>, mut u: impl FnMut(usize, &[usize]) -> T) -> Result<Self> {
        let cells: usize = strategies.iter().product();
        let mut payoffs = vec![Vec::with_capacity(cells); strategies.len()];
        let mut profile = vec![0; strategies.len()];
        for _ in 0..cells {
            for (i, table) in payoffs.iter_mut().enumerate() {
                table.push(u(i, &profile));
            }
            advance(&mut profile, &strategies);
        }
        Self::new(strategies, payoffs)
    }

    /// Two-player game from row/column payoff matrices.
    pub fn bimatrix(row: &[Vec<T>], col: &[Vec<T>]) -> Result<Self> {
        let m = row.len();
        let k = row.first().map_or(0, Vec::len);
        if col.len() != m || row.iter().chain(col).any(|r| r.len() != k) {
            return Err(Error::Usage("bimatrix payoffs must share one shape".into()));
        }
        Self::from_fn(vec![m, k], |i, p| if i == 0 { row[p[0]][p[1]] } else { col[p[0]][p[1]] })
    }

    pub fn strategies(&self) -> &[usize] {
        &self.strategies
    }

    pub fn index(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(&a, &s)| a * s).sum()
    }

    pub fn pure_payoff(&self, player: usize, profile: &[usize]) -> T {
        self.payoffs[player][self.index(profile)]
    }

    /// All pure profiles in storage order.
    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let cells: usize = self.strategies.iter().product();
        let mut profile = vec![0; self.strategies.len()];
        (0..cells).map(move |_| {
            let current = profile.clone();
            advance(&mut profile, &self.strategies);
            current
        })
    }

    /// The mixed profile putting all mass on `profile`.
    pub fn vertex(&self, profile: &[usize]) -> Vec<T> {
        let mut x = vec![T::zero(); self.space.dim()];
        for (i, &a) in profile.iter().enumerate() {
            x[self.space.offset(i) + a] = T::one();
        }
        x
    }

    /// Payoff range `max u - min u` over all players and cells.
    pub fn payoff_range(&self) -> T {
        let all = self.payoffs.iter().flatten();
        let max = all.clone().fold(T::neg_infinity(), |m, &v| m.max(v));
        let min = all.fold(T::infinity(), |m, &v| m.min(v));
        max - min
    }

    /// Product of `x_{j, a_j}` over players `j` not in `skip`.
    fn weight(&self, x: &[T], profile: &[usize], skip: &[usize]) -> T {
        let mut w = T::one();
        for (j, &a) in profile.iter().enumerate() {
            if !skip.contains(&j) {
                w *= x[self.space.offset(j) + a];
            }
        }
        w
    }

    fn two_by_two_equilibrium(&self) -> Option<Vec<T>> {
        if self.strategies != [2, 2] {
            return None;
        }
        let strict: Vec<Vec<usize>> = self
            .profiles()
            .filter(|p| {
                (0..2).all(|i| {
                    let mut dev = p.clone();
                    dev[i] = 1 - p[i];
                    self.pure_payoff(i, p) > self.pure_payoff(i, &dev)
                })
            })
            .collect();
        if strict.len() == 1 {
            return Some(self.vertex(&strict[0]));
        }
        // fully mixed: each player makes the other indifferent
        let u = |i: usize, a: usize, b: usize| self.pure_payoff(i, &[a, b]);
        // column player's mix q on column 0 equalizes the row player's payoffs
        let dq = u(0, 0, 0) - u(0, 0, 1) - u(0, 1, 0) + u(0, 1, 1);
        let dp = u(1, 0, 0) - u(1, 1, 0) - u(1, 0, 1) + u(1, 1, 1);
        if dq == T::zero() || dp == T::zero() {
            return None;
        }
        let q = (u(0, 1, 1) - u(0, 0, 1)) / dq;
        let p = (u(1, 1, 1) - u(1, 1, 0)) / dp;
        let inside = |t: T| t > T::zero() && t < T::one();
        (inside(p) && inside(q)).then(|| vec![p, T::one() - p, q, T::one() - q])
    }
}

fn advance(profile: &mut [usize], strategies: &[usize]) {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < strategies[i] {
            return;
        }
        profile[i] = 0;
    }
}

impl<T: Scalar> Game<T> for FiniteGame<T> {
    fn name(&self) -> &str {
        "finite"
    }

    fn action_space(&self) -> &ProductSet<T> {
        &self.space
    }

    fn payoff_unchecked(&self, player: usize, x: &[T]) -> T {
        self.profiles()
            .map(|p| self.pure_payoff(player, &p) * self.weight(x, &p, &[]))
            .sum()
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for p in self.profiles() {
            for (i, &a) in p.iter().enumerate() {
                out[self.space.offset(i) + a] += self.pure_payoff(i, &p) * self.weight(x, &p, &[i]);
            }
        }
    }

    fn hessian_unchecked(&self, x: &[T]) -> Option<DMatrix<T>> {
        // multilinear payoffs: own-block second derivatives vanish
        let d = self.space.dim();
        let half = T::lit(0.5);
        let mut h = DMatrix::zeros(d, d);
        let n = self.strategies.len();
        for p in self.profiles() {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let w = self.weight(x, &p, &[i, j]);
                    let r = self.space.offset(i) + p[i];
                    let c = self.space.offset(j) + p[j];
                    h[(r, c)] += half * (self.pure_payoff(i, &p) + self.pure_payoff(j, &p)) * w;
                }
            }
        }
        Some(h)
    }

    fn gradient_sup(&self) -> Vec<T> {
        self.payoffs
            .iter()
            .zip(&self.strategies)
            .map(|(table, &k)| {
                let m = table.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
                m * T::count(k).sqrt()
            })
            .collect()
    }

    fn pure_payoff_vectors(&self, profile: &[usize]) -> Option<Vec<T>> {
        let mut out = Vec::with_capacity(self.space.dim());
        let mut dev = profile.to_vec();
        for (i, &k) in self.strategies.iter().enumerate() {
            for a in 0..k {
                dev[i] = a;
                out.push(self.pure_payoff(i, &dev));
            }
            dev[i] = profile[i];
        }
        Some(out)
    }

    fn closed_form_equilibrium(&self) -> Option<Vec<T>> {
        self.two_by_two_equilibrium()
    }
}
