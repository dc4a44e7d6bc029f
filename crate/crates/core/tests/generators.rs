use lla_core::simulation::{generate, m1_covariance, m4_precision, ExperimentConfig, ModelId};
use nalgebra::DMatrix;

fn config(model: ModelId, n: usize, dim: usize) -> ExperimentConfig {
    ExperimentConfig::new(model, n, dim, Vec::new(), 4, 20240601)
}

#[test]
fn m1_design_covariance() {
    let rep = generate(&config(ModelId::M1, 10_000, 10), 0).unwrap();
    let x = rep.train.design().unwrap();
    let emp = x.tr_mul(x) / x.nrows() as f64;
    let diff = (emp - m1_covariance(10)).amax();
    assert!(diff <= 0.05, "{diff}");
}

#[test]
fn m4_truth_is_tridiagonal_and_inverts_the_covariance() {
    let rep = generate(&config(ModelId::M4, 50, 12), 1).unwrap();
    let theta = rep.truth.as_matrix().unwrap();
    for j in 0..12usize {
        for k in 0..12 {
            if j.abs_diff(k) > 1 {
                assert_eq!(theta[(j, k)], 0.0);
            } else {
                assert_ne!(theta[(j, k)], 0.0);
            }
        }
    }
    let gaps = [0.7f64, 0.9, 0.55];
    let mut s = vec![0.0f64];
    for g in gaps {
        s.push(s.last().unwrap() + g);
    }
    let sigma = DMatrix::from_fn(4, 4, |i, j| (-(s[i] - s[j]).abs()).exp());
    let prod = m4_precision(&gaps) * sigma;
    assert!((prod - DMatrix::identity(4, 4)).amax() < 1e-12);
}

#[test]
fn m5_truth_is_positive_definite() {
    for rep in 0..4 {
        let r = generate(&config(ModelId::M5, 50, 40), rep).unwrap();
        let theta = r.truth.as_matrix().unwrap();
        let min_eig = theta.clone().symmetric_eigen().eigenvalues.min();
        assert!(min_eig >= 1.0 - 1e-9, "rep {rep}: {min_eig}");
    }
}

#[test]
fn replications_do_not_depend_on_execution_order() {
    for model in [ModelId::M2, ModelId::M3, ModelId::M4] {
        let cfg = config(model, 30, 12);
        let forward: Vec<_> = (0..4).map(|r| generate(&cfg, r).unwrap()).collect();
        for r in (0..4).rev() {
            let again = generate(&cfg, r).unwrap();
            assert_eq!(again.truth, forward[r].truth);
            assert_eq!(again.train.design(), forward[r].train.design());
            assert_eq!(again.train.response(), forward[r].train.response());
            assert_eq!(again.train.sample_cov(), forward[r].train.sample_cov());
        }
    }
}
