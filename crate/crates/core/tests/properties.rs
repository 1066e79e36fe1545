use proptest::prelude::*;

use gameda::games::{Cournot, Game};
use gameda::geometry::ConvexSet;
use gameda::regularizer::Regularizer;

const DIM: usize = 4;

fn vector(range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, DIM)
}

fn sets() -> Vec<ConvexSet<f64>> {
    vec![
        ConvexSet::new_box(vec![0.0, -1.0, 0.5, -2.0], vec![1.0, 1.0, 3.0, -1.5]).unwrap(),
        ConvexSet::unit_simplex(DIM).unwrap(),
        ConvexSet::simplex(2.5, DIM).unwrap(),
    ]
}

fn regularizers() -> Vec<Regularizer<f64>> {
    let mut out: Vec<_> = sets().into_iter().map(Regularizer::euclidean).collect();
    out.push(Regularizer::entropic(ConvexSet::unit_simplex(DIM).unwrap()).unwrap());
    out.push(Regularizer::entropic(ConvexSet::simplex(2.5, DIM).unwrap()).unwrap());
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A feasible point built from free weights: clamped for boxes, normalized for simplices.
fn feasible(set: &ConvexSet<f64>, w: &[f64]) -> Vec<f64> {
    match set.simplex_scale() {
        Some(s) => {
            let e: Vec<f64> = w.iter().map(|v| v.exp()).collect();
            let z: f64 = e.iter().sum();
            e.iter().map(|v| s * v / z).collect()
        }
        None => set.project(w).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_is_idempotent_and_feasible(y in vector(5.0)) {
        for set in sets() {
            let p = set.project(&y).unwrap();
            prop_assert!(set.contains(&p).unwrap());
            let q = set.project(&p).unwrap();
            prop_assert!(norm(&diff(&p, &q)) <= 1e-12);
        }
    }

    #[test]
    fn projection_is_nonexpansive(y in vector(5.0), z in vector(5.0)) {
        for set in sets() {
            let (py, pz) = (set.project(&y).unwrap(), set.project(&z).unwrap());
            prop_assert!(norm(&diff(&py, &pz)) <= norm(&diff(&y, &z)) + 1e-12);
        }
    }

    #[test]
    fn projection_satisfies_the_variational_inequality(y in vector(5.0), w in vector(3.0)) {
        // <y - P(y), x - P(y)> <= 0 for every feasible x
        for set in sets() {
            let p = set.project(&y).unwrap();
            let x = feasible(&set, &w);
            prop_assert!(dot(&diff(&y, &p), &diff(&x, &p)) <= 1e-10);
        }
    }

    #[test]
    fn choice_is_the_argmax(y in vector(4.0), w in vector(3.0)) {
        // <y, Q(y)> - h(Q(y)) = h*(y) >= <y, x> - h(x)
        for reg in regularizers() {
            let q = reg.choice(&y).unwrap();
            let best = reg.conjugate(&y).unwrap();
            let at_q = dot(&y, &q) - reg.penalty(&q).unwrap();
            prop_assert!((best - at_q).abs() <= 1e-9 * best.abs().max(1.0));
            let x = feasible(reg.set(), &w);
            prop_assert!(dot(&y, &x) - reg.penalty(&x).unwrap() <= best + 1e-9);
        }
    }

    #[test]
    fn fenchel_dominates_squared_distance(y in vector(4.0), w in vector(3.0)) {
        // F(p, y) >= K/2 |Q(y) - p|^2
        for reg in regularizers() {
            let p = feasible(reg.set(), &w);
            let f = reg.fenchel(&p, &y).unwrap();
            let q = reg.choice(&y).unwrap();
            let d = reg.norm_kind().norm(&diff(&q, &p));
            prop_assert!(f >= reg.strong_convexity() / 2.0 * d * d - 1e-9, "F = {f}, d = {d}");
        }
    }

    #[test]
    fn fenchel_grows_at_most_quadratically(y in vector(4.0), z in vector(2.0), w in vector(3.0)) {
        // F(p, y + z) <= F(p, y) + <z, Q(y) - p> + |z|_*^2 / (2K)
        for reg in regularizers() {
            let p = feasible(reg.set(), &w);
            let yz: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            let q = reg.choice(&y).unwrap();
            let dual = reg.norm_kind().dual_norm(&z);
            let rhs = reg.fenchel(&p, &y).unwrap() + dot(&z, &diff(&q, &p)) + dual * dual / (2.0 * reg.strong_convexity());
            prop_assert!(reg.fenchel(&p, &yz).unwrap() <= rhs + 1e-9);
        }
    }

    #[test]
    fn choice_map_is_lipschitz(y in vector(4.0), z in vector(4.0)) {
        for reg in regularizers() {
            let (qy, qz) = (reg.choice(&y).unwrap(), reg.choice(&z).unwrap());
            let lhs = reg.norm_kind().norm(&diff(&qy, &qz));
            let rhs = reg.norm_kind().dual_norm(&diff(&y, &z)) / reg.strong_convexity();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn conjugate_gradient_is_the_choice(y in vector(3.0)) {
        let h = 1e-6;
        for reg in regularizers() {
            let q = reg.choice(&y).unwrap();
            for l in 0..DIM {
                let (mut up, mut down) = (y.clone(), y.clone());
                up[l] += h;
                down[l] -= h;
                let fd = (reg.conjugate(&up).unwrap() - reg.conjugate(&down).unwrap()) / (2.0 * h);
                prop_assert!((fd - q[l]).abs() <= 1e-6, "coordinate {l}: {fd} vs {}", q[l]);
            }
        }
    }

    #[test]
    fn cournot_gradient_matches_payoff_differences(
        b in prop::collection::vec(0.1..2.0f64, 3),
        w in prop::collection::vec(0.0..1.0f64, 3),
    ) {
        let game = Cournot::new(5.0, b, vec![1.0; 3], vec![10.0; 3]).unwrap();
        let x: Vec<f64> = w.iter().map(|t| 0.5 + 9.0 * t).collect();
        let v = game.gradient_field(&x).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (game.payoff(i, &up).unwrap() - game.payoff(i, &down).unwrap()) / (2.0 * h);
            prop_assert!((fd - v[i]).abs() <= 1e-5 * fd.abs().max(1.0));
        }
    }
}
