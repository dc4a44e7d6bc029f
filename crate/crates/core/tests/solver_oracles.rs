// Weighted-l1 solvers checked against independent brute-force references.

use lla_core::lla::{folded_objective, lla_run, make_initializer, InitializerKind, LlaConfig, LlaMode};
use lla_core::model::loss_value;
use lla_core::wl1::kkt::kkt_residual;
use lla_core::wl1::{clime_columns, solve_weighted_l1, weighted_objective, SolverOptions, Weights};
use lla_core::{Estimate, PenaltySpec, Problem};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn vector_of(est: &Estimate) -> &DVector<f64> {
    est.as_vector().expect("vector estimate")
}

fn sample_cov(rng: &mut ChaCha20Rng, n: usize, q: usize) -> DMatrix<f64> {
    let z = gaussian(rng, n, q);
    z.tr_mul(&z) / n as f64
}

// The check-loss objective is piecewise linear in two unknowns, so some
// minimizer sits where two of the hyperplanes {r_i = 0} or {b_j = 0} cross.
#[test]
fn quantile_matches_vertex_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for trial in 0..25 {
        let (n, tau) = (5, [0.25, 0.5, 0.7][trial % 3]);
        let x = gaussian(&mut rng, n, 2);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = DVector::from_fn(2, |_, _| rng.random_range(0.0..0.4));
        let problem = Problem::quantile(x.clone(), y.clone(), tau).unwrap();
        let weights = Weights::vector(w.clone()).unwrap();
        let objective = |b: &Vector2<f64>| {
            let b = DVector::from_column_slice(b.as_slice());
            weighted_objective(&problem, &weights, &Estimate::Vector(b)).unwrap()
        };

        let mut planes: Vec<(Vector2<f64>, f64)> =
            (0..n).map(|i| (Vector2::new(x[(i, 0)], x[(i, 1)]), y[i])).collect();
        planes.push((Vector2::new(1.0, 0.0), 0.0));
        planes.push((Vector2::new(0.0, 1.0), 0.0));
        let mut best = f64::INFINITY;
        for a in 0..planes.len() {
            for b in a + 1..planes.len() {
                let m = Matrix2::from_rows(&[planes[a].0.transpose(), planes[b].0.transpose()]);
                if let Some(inv) = m.try_inverse() {
                    let v = inv * Vector2::new(planes[a].1, planes[b].1);
                    best = best.min(objective(&v));
                }
            }
        }

        let sol = solve_weighted_l1(&problem, &weights, &SolverOptions::default(), None).unwrap();
        let got = objective(&Vector2::from_column_slice(vector_of(&sol.estimate).as_slice()));
        assert!(got - best <= 1e-6, "trial {trial}: solver {got} vs enumeration {best}");
        assert!(best - got <= 1e-9, "trial {trial}: enumeration missed a better point");
    }
}

// min |t|_1 s.t. |S t - e_j|_inf <= lambda over three unknowns: the optimum
// is a feasible vertex cut out by three of the nine planes
// {(S t)_i = e_ji +- lambda} and {t_k = 0}.
#[test]
fn clime_columns_match_vertex_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for trial in 0..20 {
        let s = sample_cov(&mut rng, 15, 3);
        let lambda = rng.random_range(0.05..0.5);
        let cols = clime_columns(&s, lambda, 1e-9).unwrap();
        for j in 0..3 {
            let mut planes: Vec<(Vector3<f64>, f64)> = Vec::new();
            for i in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                let row = Vector3::new(s[(i, 0)], s[(i, 1)], s[(i, 2)]);
                planes.push((row, e + lambda));
                planes.push((row, e - lambda));
            }
            for k in 0..3 {
                planes.push((Vector3::from_fn(|r, _| if r == k { 1.0 } else { 0.0 }), 0.0));
            }
            let feasible = |t: &Vector3<f64>| {
                (0..3).all(|i| {
                    let e = if i == j { 1.0 } else { 0.0 };
                    let r: f64 = (0..3).map(|k| s[(i, k)] * t[k]).sum();
                    (r - e).abs() <= lambda + 1e-10
                })
            };
            let mut best = f64::INFINITY;
            for a in 0..planes.len() {
                for b in a + 1..planes.len() {
                    for c in b + 1..planes.len() {
                        let m = Matrix3::from_rows(&[
                            planes[a].0.transpose(),
                            planes[b].0.transpose(),
                            planes[c].0.transpose(),
                        ]);
                        if m.determinant().abs() < 1e-12 {
                            continue;
                        }
                        let v = m.try_inverse().unwrap()
                            * Vector3::new(planes[a].1, planes[b].1, planes[c].1);
                        if feasible(&v) {
                            best = best.min(v.abs().sum());
                        }
                    }
                }
            }
            let got: f64 = cols.column(j).iter().map(|v| v.abs()).sum();
            assert!((got - best).abs() <= 1e-6, "trial {trial} column {j}: {got} vs {best}");
        }
    }
}

// Coarse-to-fine grid search over [-5, 5]^2.
#[test]
fn logistic_matches_grid_search() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for trial in 0..4 {
        let n = 20;
        let x = gaussian(&mut rng, n, 2);
        let beta = Vector2::new(1.0, -0.5);
        let y = DVector::from_fn(n, |i, _| {
            let eta = x[(i, 0)] * beta[0] + x[(i, 1)] * beta[1];
            let p = 1.0 / (1.0 + (-eta).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        });
        let w = [0.02 + 0.03 * trial as f64, 0.05];
        let objective = |b0: f64, b1: f64| {
            let mut total = 0.0;
            for i in 0..n {
                let e = x[(i, 0)] * b0 + x[(i, 1)] * b1;
                total += e.max(0.0) + (-e.abs()).exp().ln_1p() - y[i] * e;
            }
            total / n as f64 + w[0] * b0.abs() + w[1] * b1.abs()
        };

        let (mut c0, mut c1, mut half, mut step) = (0.0f64, 0.0f64, 5.0f64, 1e-2f64);
        let mut best = f64::INFINITY;
        for _ in 0..4 {
            let k = (half / step).round() as i64;
            let (base0, base1) = (c0, c1);
            for a in -k..=k {
                for b in -k..=k {
                    let (b0, b1) = (base0 + a as f64 * step, base1 + b as f64 * step);
                    let v = objective(b0, b1);
                    if v < best {
                        best = v;
                        c0 = b0;
                        c1 = b1;
                    }
                }
            }
            half = 2.0 * step;
            step /= 20.0;
        }

        let problem = Problem::logistic(x.clone(), y.clone()).unwrap();
        let weights = Weights::vector(DVector::from_column_slice(&w)).unwrap();
        let sol = solve_weighted_l1(&problem, &weights, &SolverOptions::default(), None).unwrap();
        let b = vector_of(&sol.estimate);
        let got = objective(b[0], b[1]);
        assert!(b.amax() < 5.0);
        assert!((got - best).abs() <= 1e-5, "trial {trial}: solver {got} vs grid {best}");
        assert!(got <= best + 1e-12, "trial {trial}: grid beat the solver");
    }
}

#[test]
fn logistic_kkt_on_random_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    for trial in 0..20 {
        let (n, p) = (60, 15);
        let x = gaussian(&mut rng, n, p);
        let y = DVector::from_fn(n, |i, _| {
            let eta = 1.5 * x[(i, 0)] - x[(i, 1)];
            if rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()) {
                1.0
            } else {
                0.0
            }
        });
        let w = DVector::from_fn(p, |_, _| rng.random_range(0.01..0.1));
        let problem = Problem::logistic(x, y).unwrap();
        let weights = Weights::vector(w).unwrap();
        let sol = solve_weighted_l1(&problem, &weights, &SolverOptions::default(), None).unwrap();
        let r = kkt_residual(&problem, &weights, &sol.estimate).unwrap();
        assert!(r <= 1e-7, "trial {trial}: KKT residual {r}");
    }
}

// Proximal gradient with backtracking on
// -logdet T + <S, T> + sum_jk w_jk |t_jk|.
fn precision_reference(s: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let q = s.nrows();
    let smooth = |t: &DMatrix<f64>| -> Option<f64> {
        let chol = t.clone().cholesky()?;
        let ld: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(-ld + t.component_mul(s).sum())
    };
    let mut t = DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v));
    let mut step = 1.0;
    for _ in 0..20_000 {
        let f = smooth(&t).unwrap();
        let grad = s - t.clone().try_inverse().unwrap();
        let next = loop {
            let cand = DMatrix::from_fn(q, q, |j, k| {
                let v = t[(j, k)] - step * grad[(j, k)];
                let cut = step * w[(j, k)];
                v.signum() * (v.abs() - cut).max(0.0)
            });
            let d = &cand - &t;
            match smooth(&cand) {
                Some(fc) if fc <= f + grad.component_mul(&d).sum() + d.norm_squared() / (2.0 * step) => {
                    break cand
                }
                _ => step *= 0.5,
            }
        };
        let change = (&next - &t).amax();
        t = next;
        step *= 1.5;
        if change < 1e-14 {
            break;
        }
    }
    t
}

#[test]
fn precision_matches_proximal_gradient() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    for trial in 0..10 {
        let s = sample_cov(&mut rng, 25, 3);
        let mut w = DMatrix::zeros(3, 3);
        for j in 0..3 {
            for k in 0..j {
                let v = rng.random_range(0.0..0.3);
                w[(j, k)] = v;
                w[(k, j)] = v;
            }
        }
        let problem = Problem::precision(s.clone()).unwrap();
        let weights = Weights::matrix(w.clone()).unwrap();
        let reference = Estimate::Matrix(precision_reference(&s, &w));
        let sol = solve_weighted_l1(&problem, &weights, &SolverOptions::default(), None).unwrap();
        let got = weighted_objective(&problem, &weights, &sol.estimate).unwrap();
        let want = weighted_objective(&problem, &weights, &reference).unwrap();
        assert!((got - want).abs() <= 1e-6, "trial {trial}: {got} vs {want}");
        assert!(sol.estimate.max_abs_diff(&reference) <= 1e-5, "trial {trial}");
    }
}

// Scaling y and the weights by c scales the linear solution by c.
#[test]
fn linear_solution_is_scale_equivariant() {
    let mut rng = ChaCha20Rng::seed_from_u64(16);
    let (n, p) = (40, 12);
    let x = gaussian(&mut rng, n, p);
    let mut beta = DVector::zeros(p);
    beta[0] = 2.0;
    beta[3] = -1.0;
    let y = &x * &beta + DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = DVector::from_fn(p, |_, _| rng.random_range(0.05..0.3));
    let opts = SolverOptions::default();
    let base = Problem::linear(x.clone(), y.clone()).unwrap();
    let b1 = solve_weighted_l1(&base, &Weights::vector(w.clone()).unwrap(), &opts, None).unwrap();
    for c in [0.1, 3.0, 50.0] {
        let scaled = Problem::linear(x.clone(), &y * c).unwrap();
        let bc = solve_weighted_l1(&scaled, &Weights::vector(&w * c).unwrap(), &opts, None).unwrap();
        let diff = (vector_of(&bc.estimate) / c - vector_of(&b1.estimate)).amax();
        assert!(diff <= 1e-7, "c = {c}: {diff}");
        assert_eq!(bc.estimate.support(), b1.estimate.support());
    }
}

// Each weighted solve is no worse than zero or the warm start, and the
// folded objective never rises along the LLA trace.
#[test]
fn objectives_descend() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let opts = SolverOptions::default();
    for trial in 0..10 {
        let (n, p) = (50, 30);
        let x = gaussian(&mut rng, n, p);
        let mut beta = DVector::zeros(p);
        beta[0] = 3.0;
        beta[1] = 1.5;
        beta[4] = 2.0;
        let y = &x * &beta + DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let problem = Problem::linear(x, y).unwrap();
        let penalty = PenaltySpec::scad(0.3).unwrap();
        let init = make_initializer(InitializerKind::LassoTuned(0.1), &problem, &opts).unwrap();
        let weights = Weights::from_estimate(&penalty, &init);
        let sol = solve_weighted_l1(&problem, &weights, &opts, Some(&init)).unwrap();
        let got = weighted_objective(&problem, &weights, &sol.estimate).unwrap();
        assert!(got <= weighted_objective(&problem, &weights, &problem.zero_estimate()).unwrap() + 1e-12);
        assert!(got <= weighted_objective(&problem, &weights, &init).unwrap() + 1e-12);

        let config = LlaConfig::new(LlaMode::Converged, penalty);
        let (last, trace) = lla_run(&problem, &config, &init).unwrap();
        assert!(trace.converged, "trial {trial}");
        for pair in trace.objectives.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10, "trial {trial}: {:?}", trace.objectives);
        }
        let f = folded_objective(&problem, &penalty, &last).unwrap();
        assert!(f <= loss_value(&problem, &problem.zero_estimate()).unwrap());
    }
}

#[test]
fn lasso_initializer_is_one_step_from_zero() {
    let mut rng = ChaCha20Rng::seed_from_u64(18);
    let opts = SolverOptions::default();
    let x = gaussian(&mut rng, 60, 20);
    let y = DVector::from_fn(60, |i, _| 2.0 * x[(i, 2)] + rng.sample::<f64, _>(StandardNormal));
    let problem = Problem::linear(x, y).unwrap();
    for penalty in [PenaltySpec::scad(0.2).unwrap(), PenaltySpec::mcp(0.2).unwrap()] {
        let lasso = make_initializer(InitializerKind::LassoTuned(0.2), &problem, &opts).unwrap();
        let config = LlaConfig::new(LlaMode::OneStep, penalty);
        let (one, _) = lla_run(&problem, &config, &problem.zero_estimate()).unwrap();
        assert!(one.max_abs_diff(&lasso) <= 1e-8);
    }
}
