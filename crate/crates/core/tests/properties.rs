use lla_core::model::{loss_gradient, loss_value};
use lla_core::simulation::compute_metrics;
use lla_core::wl1::{solve_clime, SolverOptions};
use lla_core::{Estimate, Family, PenaltySpec, Problem, Support};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Scad), Just(Family::Mcp), Just(Family::HardThreshold)]
}

fn spec() -> impl Strategy<Value = PenaltySpec> {
    (family(), 0.01f64..10.0, 0.0f64..3.0).prop_map(|(f, lambda, extra)| {
        let a = match f {
            Family::Scad => 2.0 + extra,
            _ => 1.0 + extra.max(0.05),
        };
        PenaltySpec::new(f, lambda, a).unwrap()
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn spd(q: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(q, q).prop_map(move |u| u.tr_mul(&u) + DMatrix::identity(q, q) * 0.5)
}

fn regression(logistic: bool) -> impl Strategy<Value = Problem> {
    (matrix(12, 4), prop::collection::vec(0.0f64..1.0, 12)).prop_map(move |(x, u)| {
        let y = DVector::from_iterator(12, u.into_iter().map(|v| if logistic { v.round() } else { 4.0 * v - 2.0 }));
        if logistic {
            Problem::logistic(x, y).unwrap()
        } else {
            Problem::linear(x, y).unwrap()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_is_nonincreasing_and_vanishes_past_a_lambda(spec in spec()) {
        let (lambda, a) = (spec.lambda(), spec.a());
        let c = spec.constants();
        let mut prev = f64::INFINITY;
        for i in 0..=((200.0 * a).ceil() as usize) {
            let t = i as f64 * lambda / 100.0;
            let d = spec.derivative(t).unwrap();
            prop_assert!(d <= prev + 1e-12 * lambda);
            if t > 0.0 && t <= c.a2 * lambda {
                prop_assert!(d >= c.a1 * lambda - 1e-12 * lambda);
            }
            if t >= a * lambda {
                prop_assert_eq!(d, 0.0);
            }
            prev = d;
        }
    }

    #[test]
    fn value_is_even_and_bounded(spec in spec(), t in -50.0f64..50.0) {
        let v = spec.value(t);
        prop_assert_eq!(v, spec.value(-t));
        prop_assert!(v >= 0.0);
        prop_assert!(v <= spec.value(spec.a() * spec.lambda()) + 1e-12);
    }

    #[test]
    fn losses_are_convex(
        problem in prop_oneof![regression(false), regression(true)],
        b1 in prop::collection::vec(-3.0f64..3.0, 4),
        b2 in prop::collection::vec(-3.0f64..3.0, 4),
        t in 0.0f64..1.0,
    ) {
        let (b1, b2) = (DVector::from_vec(b1), DVector::from_vec(b2));
        let mid = &b1 * t + &b2 * (1.0 - t);
        let f = |b: DVector<f64>| loss_value(&problem, &Estimate::Vector(b)).unwrap();
        prop_assert!(f(mid) <= t * f(b1) + (1.0 - t) * f(b2) + 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences(
        problem in prop_oneof![regression(false), regression(true)],
        b in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let b = DVector::from_vec(b);
        let g = loss_gradient(&problem, &Estimate::Vector(b.clone())).unwrap();
        let g = g.as_vector().unwrap();
        let h = 1e-5;
        for j in 0..4 {
            let mut up = b.clone();
            let mut down = b.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (loss_value(&problem, &Estimate::Vector(up)).unwrap()
                - loss_value(&problem, &Estimate::Vector(down)).unwrap()) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + g[j].abs()), "coordinate {}: {} vs {}", j, fd, g[j]);
        }
    }

    #[test]
    fn precision_gradient_matches_finite_differences(s in spd(3), theta in spd(3)) {
        let problem = Problem::precision(s).unwrap();
        let g = loss_gradient(&problem, &Estimate::Matrix(theta.clone())).unwrap();
        let g = g.as_matrix().unwrap();
        let h = 1e-6;
        for j in 0..3 {
            for k in 0..3 {
                // A symmetric perturbation of (j, k) and (k, j).
                let mut e = DMatrix::zeros(3, 3);
                e[(j, k)] += h;
                e[(k, j)] += h;
                let fd = (loss_value(&problem, &Estimate::Matrix(&theta + &e)).unwrap()
                    - loss_value(&problem, &Estimate::Matrix(&theta - &e)).unwrap()) / (2.0 * h);
                let want = if j == k { 2.0 * g[(j, j)] } else { g[(j, k)] + g[(k, j)] };
                prop_assert!((fd - want).abs() <= 1e-6 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn metrics_loss_is_symmetric_and_counts_add_up(
        a in prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 8),
        b in prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 8),
    ) {
        let (ea, eb) = (Estimate::Vector(DVector::from_vec(a)), Estimate::Vector(DVector::from_vec(b)));
        let (sa, sb) = (ea.support(), eb.support());
        let ab = compute_metrics(&ea, &eb, &sb);
        let ba = compute_metrics(&eb, &ea, &sa);
        prop_assert_eq!(ab.l2_loss, ba.l2_loss);
        prop_assert_eq!(ab.l1_loss, ba.l1_loss);
        let selected = ea.support().len();
        let true_positives = selected - ab.false_positives;
        let true_negatives = 8 - sb.len() - ab.false_positives;
        prop_assert_eq!(ab.false_positives + true_positives + ab.false_negatives + true_negatives, 8);
        prop_assert_eq!(true_positives + ab.false_negatives, sb.len());
    }

    #[test]
    fn clime_output_is_symmetric(s in spd(4), lambda in 0.05f64..1.0) {
        let sol = solve_clime(&s, lambda, &SolverOptions::default()).unwrap();
        let t = sol.estimate.as_matrix().unwrap();
        prop_assert_eq!(t, &t.transpose());
    }
}

#[test]
fn precision_metrics_count_pairs() {
    let truth = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let est = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.2, 0.0, 1.0, 0.0, 0.2, 0.0, 1.0]);
    let support = Estimate::Matrix(truth.clone()).support();
    assert!(matches!(support, Support::Edges(ref e) if e.len() == 1));
    let m = compute_metrics(&Estimate::Matrix(est), &Estimate::Matrix(truth), &support);
    assert_eq!((m.false_positives, m.false_negatives), (1, 1));
}
