use crate::error::{check_dim, Error, Result};
use crate::games::Game;
use crate::regularizer::ProductRegularizer;
use crate::scalar::Scalar;

/// Samples of `y(t)`, `x(t) = Q(y(t))` and `F(p, y(t))` for each base point
/// `p`, on the grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath<T> {
    pub dt: T,
    pub times: Vec<T>,
    pub scores: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
    /// `fenchel[j][k] = F(base_points[j], y(t_k))`.
    pub fenchel: Vec<Vec<T>>,
}

/// Integrates `dy/dt = v(Q(y))` with classical fourth-order Runge-Kutta.
pub fn continuous_reference<T, G>(
    game: &G,
    reg: &ProductRegularizer<T>,
    y0: &[T],
    horizon: T,
    dt: T,
    base_points: &[Vec<T>],
) -> Result<ContinuousPath<T>>
where
    T: Scalar,
    G: Game<T> + ?Sized,
{
    let d = reg.dim();
    check_dim(game.action_space().dim(), d)?;
    check_dim(d, y0.len())?;
    if !(dt > T::zero()) || horizon < dt {
        return Err(Error::Usage("continuous reference needs dt > 0 and T >= dt".into()));
    }
    for p in base_points {
        check_dim(d, p.len())?;
        reg.space().require_feasible(p)?;
    }
    let steps = (horizon / dt).round().to_usize().unwrap_or(0);

    let mut x = vec![T::zero(); d];
    let field = |y: &[T], x: &mut Vec<T>, out: &mut Vec<T>| {
        reg.choice_into(y, x);
        game.gradient_into(x, out);
    };

    let mut path = ContinuousPath {
        dt,
        times: Vec::with_capacity(steps + 1),
        scores: Vec::with_capacity(steps + 1),
        actions: Vec::with_capacity(steps + 1),
        fenchel: vec![Vec::with_capacity(steps + 1); base_points.len()],
    };
    let push = |path: &mut ContinuousPath<T>, k: usize, y: &[T], x: &mut Vec<T>| {
        reg.choice_into(y, x);
        path.times.push(dt * T::count(k));
        path.scores.push(y.to_vec());
        path.actions.push(x.clone());
        for (series, p) in path.fenchel.iter_mut().zip(base_points) {
            series.push(reg.fenchel_unchecked(p, y));
        }
    };

    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]);
    let mut probe = vec![T::zero(); d];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    push(&mut path, 0, &y, &mut x);
    for k in 1..=steps {
        field(&y, &mut x, &mut k1);
        for l in 0..d {
            probe[l] = y[l] + half * dt * k1[l];
        }
        field(&probe, &mut x, &mut k2);
        for l in 0..d {
            probe[l] = y[l] + half * dt * k2[l];
        }
        field(&probe, &mut x, &mut k3);
        for l in 0..d {
            probe[l] = y[l] + dt * k3[l];
        }
        field(&probe, &mut x, &mut k4);
        for l in 0..d {
            y[l] += dt * sixth * (k1[l] + T::lit(2.0) * (k2[l] + k3[l]) + k4[l]);
        }
        push(&mut path, k, &y, &mut x);
    }
    Ok(path)
}
