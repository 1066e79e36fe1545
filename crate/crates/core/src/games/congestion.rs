use nalgebra::DMatrix;

use super::Game;
use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::scalar::Scalar;

/// A resource with affine per-unit cost `c_r(w) = alpha + beta * w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Resource<T> {
    pub name: String,
    pub alpha: T,
    pub beta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionPlayer<T> {
    pub load: T,
    /// Path names, aligned with `paths`.
    pub path_names: Vec<String>,
    /// Each path is a set of resource indices.
    pub paths: Vec<Vec<usize>>,
}

/// Atomic splittable congestion game. Player `i` spreads load `rho_i` over
/// its paths and pays `sum_p x_ip sum_{r in p} c_r(w_r)`; the payoff is the
/// negated cost.
#[derive(Debug, Clone)]
pub struct CongestionGame<T> {
    resources: Vec<Resource<T>>,
    players: Vec<CongestionPlayer<T>>,
    space: ProductSet<T>,
}

impl<T: Scalar> CongestionGame<T> {
    pub fn new(resources: Vec<Resource<T>>, players: Vec<CongestionPlayer<T>>) -> Result<Self> {
        if resources.is_empty() || players.is_empty() {
            return Err(Error::Usage("congestion game needs resources and players".into()));
        }
        for r in &resources {
            if r.alpha < T::zero() || r.beta < T::zero() {
                return Err(Error::Usage(format!("resource {} has a negative cost coefficient", r.name)));
            }
        }
        let mut factors = Vec::with_capacity(players.len());
        for (i, p) in players.iter().enumerate() {
            if p.paths.is_empty() || p.path_names.len() != p.paths.len() {
                return Err(Error::Usage(format!("player {i} has no paths")));
            }
            if p.paths.iter().flatten().any(|&r| r >= resources.len()) {
                return Err(Error::Usage(format!("player {i} references an unknown resource")));
            }
            factors.push(ConvexSet::simplex(p.load, p.paths.len())?);
        }
        let space = ProductSet::new(factors)?;
        Ok(Self { resources, players, space })
    }

    pub fn resources(&self) -> &[Resource<T>] {
        &self.resources
    }

    pub fn player(&self, i: usize) -> &CongestionPlayer<T> {
        &self.players[i]
    }

    /// Demand `w_r` on every resource.
    pub fn demands(&self, x: &[T]) -> Vec<T> {
        let mut w = vec![T::zero(); self.resources.len()];
        for (i, p) in self.players.iter().enumerate() {
            let xi = self.space.block(x, i);
            for (path, &flow) in p.paths.iter().zip(xi) {
                for &r in path {
                    w[r] += flow;
                }
            }
        }
        w
    }

    fn shared_beta(&self, p: &[usize], q: &[usize]) -> T {
        p.iter()
            .filter(|r| q.contains(r))
            .map(|&r| self.resources[r].beta)
            .sum()
    }
}

impl<T: Scalar> Game<T> for CongestionGame<T> {
    fn name(&self) -> &str {
        "congestion"
    }

    fn action_space(&self) -> &ProductSet<T> {
        &self.space
    }

    fn payoff_unchecked(&self, i: usize, x: &[T]) -> T {
        let w = self.demands(x);
        let xi = self.space.block(x, i);
        let cost: T = self.players[i]
            .paths
            .iter()
            .zip(xi)
            .map(|(path, &flow)| {
                let c: T = path
                    .iter()
                    .map(|&r| self.resources[r].alpha + self.resources[r].beta * w[r])
                    .sum();
                flow * c
            })
            .sum();
        -cost
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        // d cost_i / d x_ip = sum_{r in p} [c_r(w_r) + beta_r * (own load on r)]
        let w = self.demands(x);
        let mut own = vec![T::zero(); self.resources.len()];
        for (i, p) in self.players.iter().enumerate() {
            own.iter_mut().for_each(|v| *v = T::zero());
            let range = self.space.range(i);
            for (path, &flow) in p.paths.iter().zip(&x[range.clone()]) {
                for &r in path {
                    own[r] += flow;
                }
            }
            for (path, o) in p.paths.iter().zip(&mut out[range]) {
                *o = -path
                    .iter()
                    .map(|&r| {
                        let res = &self.resources[r];
                        res.alpha + res.beta * (w[r] + own[r])
                    })
                    .sum::<T>();
            }
        }
    }

    fn hessian_unchecked(&self, _x: &[T]) -> Option<DMatrix<T>> {
        let d = self.space.dim();
        let mut h = DMatrix::zeros(d, d);
        for (i, pi) in self.players.iter().enumerate() {
            for (j, pj) in self.players.iter().enumerate() {
                let factor = if i == j { T::lit(2.0) } else { T::one() };
                for (a, pa) in pi.paths.iter().enumerate() {
                    for (b, pb) in pj.paths.iter().enumerate() {
                        h[(self.space.offset(i) + a, self.space.offset(j) + b)] =
                            -factor * self.shared_beta(pa, pb);
                    }
                }
            }
        }
        Some(h)
    }

    fn gradient_sup(&self) -> Vec<T> {
        let total: T = self.players.iter().map(|p| p.load).sum();
        self.players
            .iter()
            .map(|p| {
                p.paths
                    .iter()
                    .map(|path| {
                        let s: T = path
                            .iter()
                            .map(|&r| {
                                let res = &self.resources[r];
                                res.alpha + res.beta * (total + p.load)
                            })
                            .sum();
                        s * s
                    })
                    .sum::<T>()
                    .sqrt()
            })
            .collect()
    }
}
