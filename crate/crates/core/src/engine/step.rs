use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step-size sequence `gamma_n`, indexed from `n = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy<T> {
    Constant(T),
    /// `gamma_n = initial * n^(-exponent)` with `exponent in (0, 1]`.
    Power { initial: T, exponent: T },
    /// Constant `gamma = sqrt(2 K Omega / horizon) / V*`, tuned for a fixed
    /// horizon.
    HorizonOptimal { horizon: usize, k: T, omega: T, v_star: T },
}

impl<T: Scalar> StepPolicy<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        match *self {
            StepPolicy::Constant(g) if !positive(g) => Err(Error::Usage("step.gamma must be positive".into())),
            StepPolicy::Power { initial, .. } if !positive(initial) => {
                Err(Error::Usage("step.initial must be positive".into()))
            }
            StepPolicy::Power { exponent, .. } if !(exponent > T::zero() && exponent <= T::one()) => {
                Err(Error::Usage(format!("step.exponent must lie in (0, 1], got {exponent}")))
            }
            StepPolicy::HorizonOptimal { horizon, k, omega, v_star } => {
                if horizon == 0 {
                    Err(Error::Usage("step.horizon must be at least 1".into()))
                } else if !(positive(k) && positive(omega) && positive(v_star)) {
                    Err(Error::Usage("step tuning constants K, Omega, V* must be positive".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn gamma(&self, n: usize) -> T {
        debug_assert!(n >= 1);
        match *self {
            StepPolicy::Constant(g) => g,
            StepPolicy::Power { initial, exponent } => initial * T::count(n).powf(-exponent),
            StepPolicy::HorizonOptimal { horizon, k, omega, v_star } => {
                (T::lit(2.0) * k * omega / T::count(horizon)).sqrt() / v_star
            }
        }
    }

    /// `sum_{k=1}^n gamma_k`.
    pub fn sum(&self, n: usize) -> T {
        (1..=n).map(|k| self.gamma(k)).sum()
    }

    /// `sum_{k=1}^n gamma_k^2`.
    pub fn square_sum(&self, n: usize) -> T {
        (1..=n).map(|k| self.gamma(k).powi(2)).sum()
    }

    /// `sum_{k=1}^inf gamma_k^2`, when finite.
    pub fn square_sum_infinite(&self) -> Option<T> {
        match *self {
            StepPolicy::Power { initial, exponent } if exponent > T::lit(0.5) => {
                let s = (T::lit(2.0) * exponent).as_f64();
                Some(initial * initial * T::lit(zeta(s)))
            }
            _ => None,
        }
    }
}

/// Riemann zeta for `s > 1`: direct sum plus an Euler-Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta diverges for s <= 1");
    const N: usize = 1000;
    let head: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    let n = N as f64;
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

/// Right-hand side of the ergodic gap bound,
/// `(F1 + V*^2 / (2K) * sum gamma^2) / sum gamma`.
pub fn gap_ergodic_bound<T: Scalar>(f1: T, v_star: T, k: T, gamma_sum: T, gamma_square_sum: T) -> T {
    (f1 + v_star * v_star / (T::lit(2.0) * k) * gamma_square_sum) / gamma_sum
}

/// `2 V* sqrt(Omega / (K n))`: the ergodic gap bound under the
/// horizon-optimal constant step and `Y_1 = 0`.
pub fn gap_ergodic_optimal_bound<T: Scalar>(v_star: T, omega: T, k: T, n: usize) -> T {
    T::lit(2.0) * v_star * (omega / (k * T::count(n))).sqrt()
}

/// Bound on the mean running length before entering the `epsilon`-ball
/// around an `L`-strongly stable set.
pub fn length_bound<T: Scalar>(v_star: T, k: T, l: T, f1: T, gamma_square_sum_inf: T, epsilon: T) -> T {
    v_star / (k * l) * (f1 + v_star * v_star / (T::lit(2.0) * k) * gamma_square_sum_inf) / (epsilon * epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_schedule() {
        let p = StepPolicy::Power { initial: 1.0, exponent: 1.0 };
        assert_eq!(p.gamma(1), 1.0);
        assert_eq!(p.gamma(2), 0.5);
        assert_relative_eq!(p.sum(2), 1.5);
        let q = StepPolicy::Power { initial: 0.1, exponent: 0.8 };
        assert!((1..100).all(|n| q.gamma(n + 1) <= q.gamma(n)));
    }

    #[test]
    fn validation() {
        assert!(StepPolicy::Power { initial: 1.0, exponent: 1.5 }.validate().is_err());
        assert!(StepPolicy::Power { initial: 1.0, exponent: 0.0 }.validate().is_err());
        assert!(StepPolicy::Power { initial: 1.0, exponent: 1.0 }.validate().is_ok());
        assert!(StepPolicy::Constant(0.0).validate().is_err());
        assert!(StepPolicy::HorizonOptimal { horizon: 0, k: 1.0, omega: 1.0, v_star: 1.0 }.validate().is_err());
    }

    #[test]
    fn horizon_optimal_meets_closed_form_bound() {
        let (k, omega, v, n) = (1.0, 150.0, 62.36, 1000);
        let p = StepPolicy::HorizonOptimal { horizon: n, k, omega, v_star: v };
        let g = p.gamma(1);
        assert_relative_eq!(g, (2.0 * k * omega / n as f64).sqrt() / v);
        // F1 <= Omega when Y_1 = 0; the general bound is then sqrt(2) V* sqrt(Omega / (K n))
        let general = gap_ergodic_bound(omega, v, k, p.sum(n), p.square_sum(n));
        assert_relative_eq!(general, 2f64.sqrt() * v * (omega / (k * n as f64)).sqrt(), max_relative = 1e-12);
        assert!(general <= gap_ergodic_optimal_bound(v, omega, k, n));
    }

    #[test]
    fn zeta_values() {
        assert_relative_eq!(zeta(2.0), std::f64::consts::PI.powi(2) / 6.0, max_relative = 1e-12);
        assert_relative_eq!(zeta(4.0), std::f64::consts::PI.powi(4) / 90.0, max_relative = 1e-12);
        // slowly convergent case against a long partial sum plus integral tail
        let direct: f64 = (1..2_000_000).map(|k| (k as f64).powf(-1.4)).sum::<f64>()
            + 2_000_000f64.powf(-0.4) / 0.4;
        assert_relative_eq!(zeta(1.4), direct, max_relative = 1e-6);
        let p = StepPolicy::Power { initial: 2.0, exponent: 0.7 };
        assert_relative_eq!(p.square_sum_infinite().unwrap(), 4.0 * zeta(1.4));
        assert!(StepPolicy::Power { initial: 1.0, exponent: 0.5 }.square_sum_infinite().is_none());
    }
}
