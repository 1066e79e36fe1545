//! Compact convex action sets: boxes and scaled simplices, their products,
//! Euclidean projections and tangent/polar cone queries.
//!
//! Primal and dual vectors share one coordinate array; the pairing between
//! them is the standard dot product.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, norm2, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind<T> {
    Box { lower: Vec<T>, upper: Vec<T> },
    /// `{x >= 0 : sum(x) = scale}` in `dim` coordinates.
    ScaledSimplex { scale: T, dim: usize },
}

/// A single player's action set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet<T> {
    kind: SetKind<T>,
    tol: T,
}

impl<T: Scalar> ConvexSet<T> {
    pub fn new_box(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidSet("box must have at least one coordinate".into()));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidSet(format!("non-finite bound at coordinate {i}")));
            }
            if l > u {
                return Err(Error::InvalidSet(format!("lower > upper at coordinate {i}")));
            }
        }
        Ok(Self { kind: SetKind::Box { lower, upper }, tol: T::default_tol() })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: T, hi: T, dim: usize) -> Result<Self> {
        Self::new_box(vec![lo; dim], vec![hi; dim])
    }

    pub fn simplex(scale: T, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("simplex dimension must be positive".into()));
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidSet("simplex scale must be positive and finite".into()));
        }
        Ok(Self { kind: SetKind::ScaledSimplex { scale, dim }, tol: T::default_tol() })
    }

    pub fn unit_simplex(dim: usize) -> Result<Self> {
        Self::simplex(T::one(), dim)
    }

    /// Overrides the feasibility/cone tolerance.
    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &SetKind<T> {
        &self.kind
    }

    pub fn tolerance(&self) -> T {
        self.tol
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::ScaledSimplex { dim, .. } => *dim,
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self.kind, SetKind::ScaledSimplex { .. })
    }

    /// Scale of a simplex, `None` for boxes.
    pub fn simplex_scale(&self) -> Option<T> {
        match self.kind {
            SetKind::ScaledSimplex { scale, .. } => Some(scale),
            SetKind::Box { .. } => None,
        }
    }

    pub fn contains(&self, x: &[T]) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[T]) -> bool {
        let tol = self.tol;
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol),
            SetKind::ScaledSimplex { scale, .. } => {
                let sum: T = x.iter().copied().sum();
                x.iter().all(|&v| v >= -tol) && (sum - *scale).abs() <= tol
            }
        }
    }

    pub(crate) fn require_feasible(&self, x: &[T]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if !self.contains_unchecked(x) {
            return Err(Error::Infeasible(format!("{x:?}")));
        }
        Ok(())
    }

    /// Closest point of the set to `y` in the Euclidean norm.
    pub fn project(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim(), y.len())?;
        let mut out = vec![T::zero(); y.len()];
        self.project_into(y, &mut out);
        Ok(out)
    }

    pub(crate) fn project_into(&self, y: &[T], out: &mut [T]) {
        match &self.kind {
            SetKind::Box { lower, upper } => {
                for i in 0..y.len() {
                    out[i] = y[i].max(lower[i]).min(upper[i]);
                }
            }
            SetKind::ScaledSimplex { scale, .. } => project_simplex(y, *scale, out),
        }
    }

    /// Generators of the tangent cone at a feasible `x`, normalized to unit
    /// Euclidean length. Nonnegative combinations of these span the cone.
    pub fn tangent_generators(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.require_feasible(x)?;
        let d = self.dim();
        let tol = self.tol;
        let mut rays = Vec::new();
        let unit = |i: usize, s: T| {
            let mut z = vec![T::zero(); d];
            z[i] = s;
            z
        };
        match &self.kind {
            SetKind::Box { lower, upper } => {
                for i in 0..d {
                    if upper[i] - lower[i] <= tol {
                        continue;
                    }
                    let at_lower = x[i] <= lower[i] + tol;
                    let at_upper = x[i] >= upper[i] - tol;
                    if !at_upper {
                        rays.push(unit(i, T::one()));
                    }
                    if !at_lower {
                        rays.push(unit(i, -T::one()));
                    }
                }
            }
            SetKind::ScaledSimplex { .. } => {
                let w = T::one() / T::lit(2.0).sqrt();
                for k in (0..d).filter(|&k| x[k] > tol) {
                    for j in (0..d).filter(|&j| j != k) {
                        let mut z = vec![T::zero(); d];
                        z[j] = w;
                        z[k] = -w;
                        rays.push(z);
                    }
                }
            }
        }
        Ok(rays)
    }

    /// Whether `x + t z` stays in the set for some `t > 0`.
    pub fn tangent_cone_contains(&self, x: &[T], z: &[T]) -> Result<bool> {
        self.require_feasible(x)?;
        check_dim(self.dim(), z.len())?;
        let tol = self.tol;
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => (0..z.len()).all(|i| {
                let at_lower = x[i] <= lower[i] + tol;
                let at_upper = x[i] >= upper[i] - tol;
                (!at_lower || z[i] >= -tol) && (!at_upper || z[i] <= tol)
            }),
            SetKind::ScaledSimplex { .. } => {
                let sum: T = z.iter().copied().sum();
                sum.abs() <= tol && (0..z.len()).all(|i| x[i] > tol || z[i] >= -tol)
            }
        })
    }

    /// Whether `<y, z> <= tol` for every tangent direction `z` at `x`.
    pub fn polar_cone_contains(&self, x: &[T], y: &[T]) -> Result<bool> {
        check_dim(self.dim(), y.len())?;
        let tol = self.tol;
        Ok(self.tangent_generators(x)?.iter().all(|z| dot(y, z) <= tol))
    }

    /// A uniformly distributed feasible point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| l + (u - l) * T::lit(rng.random::<f64>()))
                .collect(),
            SetKind::ScaledSimplex { scale, dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                let mut x: Vec<T> = e.iter().map(|&v| *scale * T::lit(v / total)).collect();
                fix_simplex_sum(&mut x, *scale);
                x
            }
        }
    }

    /// A feasible point that frequently lies on faces: the projection of a
    /// wide Gaussian centred on a uniform sample.
    pub fn sample_with_faces<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let centre = self.sample(rng);
        let spread = self.extent();
        let y: Vec<T> = centre
            .iter()
            .map(|&c| {
                let g: f64 = StandardNormal.sample(rng);
                c + spread * T::lit(g)
            })
            .collect();
        let mut out = vec![T::zero(); y.len()];
        self.project_into(&y, &mut out);
        out
    }

    /// A random nonzero direction in the tangent cone at `x`, or `None` when
    /// the cone is `{0}`.
    pub fn sample_tangent<R: Rng + ?Sized>(&self, x: &[T], rng: &mut R) -> Result<Option<Vec<T>>> {
        let rays = self.tangent_generators(x)?;
        if rays.is_empty() {
            return Ok(None);
        }
        let mut z = vec![T::zero(); self.dim()];
        // a sparse random conic combination so that faces of the cone get hit too
        let picks = 1 + rng.random_range(0..rays.len().min(4));
        for _ in 0..picks {
            let r = &rays[rng.random_range(0..rays.len())];
            let w: f64 = Exp1.sample(rng);
            for (zi, &ri) in z.iter_mut().zip(r) {
                *zi += T::lit(w) * ri;
            }
        }
        if norm2(&z) <= T::epsilon() {
            return Ok(Some(rays[0].clone()));
        }
        Ok(Some(z))
    }

    /// Largest coordinate range, used to scale random perturbations.
    pub fn extent(&self) -> T {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .fold(T::zero(), |m, (&l, &u)| m.max(u - l)),
            SetKind::ScaledSimplex { scale, .. } => *scale,
        }
    }

    /// Largest Euclidean norm of a feasible point.
    pub fn max_norm(&self) -> T {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    let m = l.abs().max(u.abs());
                    m * m
                })
                .sum::<T>()
                .sqrt(),
            SetKind::ScaledSimplex { scale, .. } => *scale,
        }
    }
}

/// Sort-and-threshold projection onto `{x >= 0 : sum(x) = scale}`.
fn project_simplex<T: Scalar>(y: &[T], scale: T, out: &mut [T]) {
    let mut sorted: Vec<T> = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - scale) / T::count(j + 1);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    for (o, &v) in out.iter_mut().zip(y) {
        *o = (v - theta).max(T::zero());
    }
    fix_simplex_sum(out, scale);
}

/// Re-normalizes the largest coordinate so that the coordinates sum to
/// `scale`; a single-support point comes out as exactly `scale`.
fn fix_simplex_sum<T: Scalar>(x: &mut [T], scale: T) {
    let mut top = 0;
    for i in 1..x.len() {
        if x[i] > x[top] {
            top = i;
        }
    }
    let rest: T = x.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, &v)| v).sum();
    x[top] = (scale - rest).max(T::zero());
}

/// The players' joint action space: an ordered product of convex sets laid
/// out contiguously in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet<T> {
    factors: Vec<ConvexSet<T>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<T: Scalar> ProductSet<T> {
    pub fn new(factors: Vec<ConvexSet<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSet("product of zero factors".into()));
        }
        let mut offsets = Vec::with_capacity(factors.len());
        let mut dim = 0;
        for f in &factors {
            offsets.push(dim);
            dim += f.dim();
        }
        Ok(Self { factors, offsets, dim })
    }

    pub fn players(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor(&self, i: usize) -> &ConvexSet<T> {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[ConvexSet<T>] {
        &self.factors
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Coordinate range of player `i` in the joint vector.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.factors[i].dim()
    }

    pub fn block<'a>(&self, x: &'a [T], i: usize) -> &'a [T] {
        &x[self.range(i)]
    }

    pub fn contains(&self, x: &[T]) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[T]) -> bool {
        (0..self.players()).all(|i| self.factors[i].contains_unchecked(self.block(x, i)))
    }

    pub(crate) fn require_feasible(&self, x: &[T]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if !self.contains_unchecked(x) {
            return Err(Error::Infeasible(format!("{x:?}")));
        }
        Ok(())
    }

    pub fn project(&self, y: &[T]) -> Result<Vec<T>> {
        check_dim(self.dim, y.len())?;
        let mut out = vec![T::zero(); self.dim];
        for i in 0..self.players() {
            let r = self.range(i);
            self.factors[i].project_into(&y[r.clone()], &mut out[r]);
        }
        Ok(out)
    }

    /// Unit tangent-cone generators at `x`, embedded in joint coordinates.
    pub fn tangent_generators(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        check_dim(self.dim, x.len())?;
        let mut rays = Vec::new();
        for i in 0..self.players() {
            let r = self.range(i);
            for local in self.factors[i].tangent_generators(&x[r.clone()])? {
                let mut z = vec![T::zero(); self.dim];
                z[r.clone()].copy_from_slice(&local);
                rays.push(z);
            }
        }
        Ok(rays)
    }

    pub fn tangent_cone_contains(&self, x: &[T], z: &[T]) -> Result<bool> {
        check_dim(self.dim, z.len())?;
        for i in 0..self.players() {
            let r = self.range(i);
            if !self.factors[i].tangent_cone_contains(&x[r.clone()], &z[r])? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn polar_cone_contains(&self, x: &[T], y: &[T]) -> Result<bool> {
        check_dim(self.dim, y.len())?;
        for i in 0..self.players() {
            let r = self.range(i);
            if !self.factors[i].polar_cone_contains(&x[r.clone()], &y[r])? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.factors.iter().flat_map(|f| f.sample(rng)).collect()
    }

    pub fn sample_with_faces<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.factors.iter().flat_map(|f| f.sample_with_faces(rng)).collect()
    }

    /// Random nonzero tangent direction at `x`, or `None` if the cone is trivial.
    pub fn sample_tangent<R: Rng + ?Sized>(&self, x: &[T], rng: &mut R) -> Result<Option<Vec<T>>> {
        let rays = self.tangent_generators(x)?;
        if rays.is_empty() {
            return Ok(None);
        }
        let mut z = vec![T::zero(); self.dim];
        for i in 0..self.players() {
            let r = self.range(i);
            if rng.random::<f64>() < 0.5 {
                continue;
            }
            if let Some(local) = self.factors[i].sample_tangent(&x[r.clone()], rng)? {
                z[r].copy_from_slice(&local);
            }
        }
        if norm2(&z) <= T::epsilon() {
            return Ok(Some(rays[rng.random_range(0..rays.len())].clone()));
        }
        Ok(Some(z))
    }

    /// Upper bound on the Euclidean diameter of the product set.
    pub fn diameter(&self) -> T {
        self.factors
            .iter()
            .map(|f| match f.kind() {
                SetKind::Box { lower, upper } => lower
                    .iter()
                    .zip(upper)
                    .map(|(&l, &u)| (u - l) * (u - l))
                    .sum::<T>(),
                SetKind::ScaledSimplex { scale, .. } => T::lit(2.0) * *scale * *scale,
            })
            .sum::<T>()
            .sqrt()
    }
}
