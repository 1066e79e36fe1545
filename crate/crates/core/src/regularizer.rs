//! Penalty functions, their convex conjugates, the induced choice (mirror)
//! maps, Bregman divergences and the Fenchel coupling.
//!
//! Two kinds are shipped:
//!
//! * `Euclidean`: `h(x) = ||x||^2 / 2` on any set. Its choice map is the
//!   Euclidean projection (surjective, not steep); strongly convex with
//!   `K = 1` w.r.t. the L2 norm.
//! * `Entropic`: `h(x) = sum x log x` on a scaled simplex `rho * Delta`.
//!   Its choice map is `rho * softmax(y)` (steep, image is the relative
//!   interior); strongly convex with `K = 1/rho` w.r.t. the L1 norm.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, ProductSet, SetKind};
use crate::scalar::{dot, norm1, norm2, norm_inf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    Euclidean,
    Entropic,
}

/// Norm with respect to which the strong-convexity constant holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L1,
}

impl NormKind {
    pub fn norm<T: Scalar>(self, x: &[T]) -> T {
        match self {
            NormKind::L2 => norm2(x),
            NormKind::L1 => norm1(x),
        }
    }

    /// The dual norm: L2 is self-dual, the dual of L1 is L-infinity.
    pub fn dual_norm<T: Scalar>(self, y: &[T]) -> T {
        match self {
            NormKind::L2 => norm2(y),
            NormKind::L1 => norm_inf(y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer<T> {
    kind: RegularizerKind,
    set: ConvexSet<T>,
}

impl<T: Scalar> Regularizer<T> {
    pub fn new(kind: RegularizerKind, set: ConvexSet<T>) -> Result<Self> {
        if kind == RegularizerKind::Entropic && !set.is_simplex() {
            return Err(Error::InvalidSet("the entropic regularizer needs a simplex".into()));
        }
        Ok(Self { kind, set })
    }

    pub fn euclidean(set: ConvexSet<T>) -> Self {
        Self { kind: RegularizerKind::Euclidean, set }
    }

    pub fn entropic(set: ConvexSet<T>) -> Result<Self> {
        Self::new(RegularizerKind::Entropic, set)
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn set(&self) -> &ConvexSet<T> {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn norm_kind(&self) -> NormKind {
        match self.kind {
            RegularizerKind::Euclidean => NormKind::L2,
            RegularizerKind::Entropic => NormKind::L1,
        }
    }

    /// Strong-convexity modulus `K` w.r.t. [`Self::norm_kind`].
    pub fn strong_convexity(&self) -> T {
        match self.kind {
            RegularizerKind::Euclidean => T::one(),
            RegularizerKind::Entropic => T::one() / self.scale(),
        }
    }

    pub fn is_steep(&self) -> bool {
        self.kind == RegularizerKind::Entropic
    }

    pub fn is_surjective(&self) -> bool {
        self.kind == RegularizerKind::Euclidean
    }

    fn scale(&self) -> T {
        self.set.simplex_scale().unwrap_or_else(T::one)
    }

    pub fn penalty(&self, x: &[T]) -> Result<T> {
        self.set.require_feasible(x)?;
        Ok(self.penalty_unchecked(x))
    }

    fn penalty_unchecked(&self, x: &[T]) -> T {
        match self.kind {
            RegularizerKind::Euclidean => dot(x, x) / T::lit(2.0),
            RegularizerKind::Entropic => x.iter().map(|&v| xlogx(v)).sum(),
        }
    }

    /// `h*(y) = max_x <y, x> - h(x)`.
    pub fn conjugate(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        Ok(match self.kind {
            RegularizerKind::Euclidean => {
                let x = self.set.project(y)?;
                dot(y, &x) - dot(&x, &x) / T::lit(2.0)
            }
            RegularizerKind::Entropic => {
                let rho = self.scale();
                let (m, z) = shifted_partition(y);
                rho * (m + z.ln()) - rho * rho.ln()
            }
        })
    }

    /// `Q(y) = argmax_x <y, x> - h(x)`.
    pub fn choice(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), y.len())?;
        let mut out = vec![T::zero(); y.len()];
        self.choice_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn choice_into(&self, y: &[T], out: &mut [T]) {
        match self.kind {
            RegularizerKind::Euclidean => self.set.project_into(y, out),
            RegularizerKind::Entropic => {
                let rho = self.scale();
                let m = y.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                let mut z = T::zero();
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = (v - m).exp();
                    z += *o;
                }
                for o in out.iter_mut() {
                    *o = rho * *o / z;
                }
            }
        }
    }

    /// `D(p, x) = h(p) - h(x) - h'(x; p - x)`.
    pub fn bregman(&self, p: &[T], x: &[T]) -> Result<T> {
        self.set.require_feasible(p)?;
        self.set.require_feasible(x)?;
        Ok(match self.kind {
            RegularizerKind::Euclidean => {
                p.iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / T::lit(2.0)
            }
            RegularizerKind::Entropic => {
                let mut total = T::zero();
                for (index, (&pi, &xi)) in p.iter().zip(x).enumerate() {
                    if pi <= T::zero() {
                        total += xi.max(T::zero());
                        continue;
                    }
                    if xi <= T::zero() {
                        return Err(Error::DivergenceUndefined { index });
                    }
                    total += pi * (pi / xi).ln() - pi + xi;
                }
                total.max(T::zero())
            }
        })
    }

    /// `F(p, y) = h(p) + h*(y) - <y, p>`, evaluated in a cancellation-free form.
    pub fn fenchel(&self, p: &[T], y: &[T]) -> Result<T> {
        self.set.require_feasible(p)?;
        check_dim(self.dim(), y.len())?;
        Ok(self.fenchel_unchecked(p, y))
    }

    pub(crate) fn fenchel_unchecked(&self, p: &[T], y: &[T]) -> T {
        match self.kind {
            RegularizerKind::Euclidean => {
                // <y - Qy, Qy - p> + |Qy - p|^2 / 2, both terms nonnegative
                let mut q = vec![T::zero(); y.len()];
                self.set.project_into(y, &mut q);
                let mut cross = T::zero();
                let mut sq = T::zero();
                for i in 0..y.len() {
                    let d = q[i] - p[i];
                    cross += (y[i] - q[i]) * d;
                    sq += d * d;
                }
                cross + sq / T::lit(2.0)
            }
            RegularizerKind::Entropic => {
                let rho = self.scale();
                let (m, z) = shifted_partition(y);
                let entropy: T = p.iter().map(|&v| xlogx(v)).sum();
                let pairing: T = p.iter().zip(y).map(|(&a, &b)| a * (b - m)).sum();
                entropy - rho * rho.ln() + rho * z.ln() - pairing
            }
        }
    }

    /// `max h - min h` over the set.
    pub fn range(&self) -> T {
        let half = T::lit(0.5);
        match (self.kind, self.set.kind()) {
            (RegularizerKind::Euclidean, SetKind::Box { lower, upper }) => {
                let max: T = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| half * (l * l).max(u * u))
                    .sum();
                let min: T = lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| {
                        let c = T::zero().max(l).min(u);
                        half * c * c
                    })
                    .sum();
                max - min
            }
            (RegularizerKind::Euclidean, SetKind::ScaledSimplex { scale, dim }) => {
                half * *scale * *scale * (T::one() - T::one() / T::count(*dim))
            }
            (RegularizerKind::Entropic, SetKind::ScaledSimplex { scale, dim }) => {
                *scale * T::count(*dim).ln()
            }
            (RegularizerKind::Entropic, SetKind::Box { .. }) => unreachable!("rejected in new"),
        }
    }

    /// A dual point `y` with `Q(y) = x`: `x` itself for the Euclidean
    /// penalty, `log x` for the entropic one (interior `x` only).
    pub fn dual_witness(&self, x: &[T]) -> Option<Vec<T>> {
        match self.kind {
            RegularizerKind::Euclidean => Some(x.to_vec()),
            RegularizerKind::Entropic => {
                if x.iter().all(|&v| v > T::zero()) {
                    Some(x.iter().map(|v| v.ln()).collect())
                } else {
                    None
                }
            }
        }
    }
}

fn xlogx<T: Scalar>(v: T) -> T {
    if v <= T::zero() {
        T::zero()
    } else {
        v * v.ln()
    }
}

/// `(max y, sum exp(y - max y))`.
fn shifted_partition<T: Scalar>(y: &[T]) -> (T, T) {
    let m = y.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let z = y.iter().map(|&v| (v - m).exp()).sum();
    (m, z)
}

/// The aggregate penalty `h(x) = sum_i h_i(x_i)` over a product set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRegularizer<T> {
    space: ProductSet<T>,
    factors: Vec<Regularizer<T>>,
}

impl<T: Scalar> ProductRegularizer<T> {
    pub fn new(space: ProductSet<T>, kinds: &[RegularizerKind]) -> Result<Self> {
        check_dim(space.players(), kinds.len())?;
        let factors = space
            .factors()
            .iter()
            .zip(kinds)
            .map(|(set, &kind)| Regularizer::new(kind, set.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, factors })
    }

    /// Same kind for every player.
    pub fn uniform(space: ProductSet<T>, kind: RegularizerKind) -> Result<Self> {
        let kinds = vec![kind; space.players()];
        Self::new(space, &kinds)
    }

    pub fn space(&self) -> &ProductSet<T> {
        &self.space
    }

    pub fn factor(&self, i: usize) -> &Regularizer<T> {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[Regularizer<T>] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Aggregate modulus `K = min_i K_i`.
    pub fn strong_convexity(&self) -> T {
        self.factors
            .iter()
            .map(|r| r.strong_convexity())
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Product norm `sqrt(sum_i ||x_i||_i^2)`.
    pub fn norm(&self, x: &[T]) -> T {
        (0..self.factors.len())
            .map(|i| {
                let n = self.factors[i].norm_kind().norm(self.space.block(x, i));
                n * n
            })
            .sum::<T>()
            .sqrt()
    }

    /// Dual of the product norm.
    pub fn dual_norm(&self, y: &[T]) -> T {
        (0..self.factors.len())
            .map(|i| {
                let n = self.factors[i].norm_kind().dual_norm(self.space.block(y, i));
                n * n
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn penalty(&self, x: &[T]) -> Result<T> {
        check_dim(self.dim(), x.len())?;
        (0..self.factors.len())
            .map(|i| self.factors[i].penalty(self.space.block(x, i)))
            .sum()
    }

    pub fn conjugate(&self, y: &[T]) -> Result<T> {
        check_dim(self.dim(), y.len())?;
        (0..self.factors.len())
            .map(|i| self.factors[i].conjugate(self.space.block(y, i)))
            .sum()
    }

    pub fn choice(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), y.len())?;
        let mut out = vec![T::zero(); y.len()];
        self.choice_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn choice_into(&self, y: &[T], out: &mut [T]) {
        for (i, reg) in self.factors.iter().enumerate() {
            let r = self.space.range(i);
            reg.choice_into(&y[r.clone()], &mut out[r]);
        }
    }

    pub fn bregman(&self, p: &[T], x: &[T]) -> Result<T> {
        check_dim(self.dim(), p.len())?;
        check_dim(self.dim(), x.len())?;
        (0..self.factors.len())
            .map(|i| self.factors[i].bregman(self.space.block(p, i), self.space.block(x, i)))
            .sum()
    }

    pub fn fenchel(&self, p: &[T], y: &[T]) -> Result<T> {
        check_dim(self.dim(), p.len())?;
        check_dim(self.dim(), y.len())?;
        self.space.require_feasible(p)?;
        Ok(self.fenchel_unchecked(p, y))
    }

    pub(crate) fn fenchel_unchecked(&self, p: &[T], y: &[T]) -> T {
        (0..self.factors.len())
            .map(|i| {
                let r = self.space.range(i);
                self.factors[i].fenchel_unchecked(&p[r.clone()], &y[r])
            })
            .sum()
    }

    /// Setwise coupling `min_{p in S} F(p, y)`.
    pub fn fenchel_set(&self, points: &[Vec<T>], y: &[T]) -> Result<T> {
        if points.is_empty() {
            return Err(Error::Usage("setwise Fenchel coupling over an empty set".into()));
        }
        let mut best = T::infinity();
        for p in points {
            best = best.min(self.fenchel(p, y)?);
        }
        Ok(best)
    }

    /// `Omega = max h - min h`.
    pub fn range(&self) -> T {
        self.factors.iter().map(|r| r.range()).sum()
    }

    pub fn dual_witness(&self, x: &[T]) -> Option<Vec<T>> {
        let mut y = Vec::with_capacity(x.len());
        for (i, reg) in self.factors.iter().enumerate() {
            y.extend(reg.dual_witness(self.space.block(x, i))?);
        }
        Some(y)
    }
}
