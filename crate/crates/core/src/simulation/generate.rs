use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{ExperimentConfig, ModelId, M5_NONZEROS};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, condition_number_spd, sigmoid};
use crate::model::{sample_covariance, Estimate, LossKind, Problem, Support};

/// M5 draws whose precision matrix is worse conditioned than this are
/// redrawn.
const M5_MAX_CONDITION: f64 = 1e12;
const M5_MAX_REDRAWS: usize = 100;

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct Replication {
    pub train: Problem,
    pub validation: Problem,
    pub truth: Estimate,
    pub support: Support,
    /// Ill-conditioned M5 truths that were discarded first.
    pub redraws: usize,
}

/// The generator for replication `rep`: stream `rep` of a ChaCha20 keyed by
/// the master seed.
pub(crate) fn rep_rng(master_seed: u64, rep: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(rep as u64);
    rng
}

/// Draws the truth, then `n` training and `n` validation observations.
pub fn generate(config: &ExperimentConfig, rep: usize) -> Result<Replication> {
    config.validate()?;
    let mut rng = rep_rng(config.master_seed, rep);
    let (n, d) = (config.n, config.dim);
    match config.model {
        ModelId::M1 | ModelId::M2 | ModelId::M3 => {
            let beta = match config.model {
                ModelId::M1 => m1_beta(d),
                _ => random_signals(&mut rng, d),
            } * config.signal_scale;
            let kind = match config.model {
                ModelId::M1 => LossKind::Linear,
                ModelId::M2 => LossKind::Logistic,
                _ => LossKind::Quantile { tau: config.tau },
            };
            let train = regression_sample(&mut rng, config.model, kind, n, &beta)?;
            let validation = regression_sample(&mut rng, config.model, kind, n, &beta)?;
            let support = Estimate::Vector(beta.clone()).support();
            Ok(Replication {
                train,
                validation,
                truth: Estimate::Vector(beta),
                support,
                redraws: 0,
            })
        }
        ModelId::M4 => {
            let gaps: Vec<f64> = (1..d).map(|_| rng.random_range(0.5..1.0)).collect();
            let rho: Vec<f64> = gaps.iter().map(|g| (-g).exp()).collect();
            let theta = m4_precision(&gaps);
            let draw = |rng: &mut ChaCha20Rng| {
                let mut x = DMatrix::zeros(n, d);
                for i in 0..n {
                    x[(i, 0)] = rng.sample::<f64, _>(StandardNormal);
                    for k in 1..d {
                        let z: f64 = rng.sample(StandardNormal);
                        x[(i, k)] = rho[k - 1] * x[(i, k - 1)] + (1.0 - rho[k - 1] * rho[k - 1]).sqrt() * z;
                    }
                }
                x
            };
            let train = draw(&mut rng);
            let validation = draw(&mut rng);
            precision_replication(theta, &train, &validation, 0)
        }
        ModelId::M5 => {
            let mut redraws = 0;
            let theta = loop {
                let theta = m5_precision(&mut rng, d);
                if condition_number_spd(&theta) <= M5_MAX_CONDITION {
                    break theta;
                }
                redraws += 1;
                if redraws >= M5_MAX_REDRAWS {
                    return Err(Error::Singular("model m5 kept drawing ill-conditioned truths".into()));
                }
            };
            let l = cholesky(&theta)
                .ok_or_else(|| Error::Singular("m5 precision is not positive definite".into()))?
                .l();
            let lt = l.transpose();
            let draw = |rng: &mut ChaCha20Rng| -> Result<DMatrix<f64>> {
                // rows x' = z' L^{-1}, so Cov(x) = (L L')^{-1}
                let zt = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let xt = lt
                    .solve_upper_triangular(&zt)
                    .ok_or_else(|| Error::Singular("m5 Cholesky factor is singular".into()))?;
                Ok(xt.transpose())
            };
            let train = draw(&mut rng)?;
            let validation = draw(&mut rng)?;
            precision_replication(theta, &train, &validation, redraws)
        }
    }
}

fn precision_replication(
    theta: DMatrix<f64>,
    train: &DMatrix<f64>,
    validation: &DMatrix<f64>,
    redraws: usize,
) -> Result<Replication> {
    let truth = Estimate::Matrix(theta);
    Ok(Replication {
        train: Problem::precision(sample_covariance(train)?)?,
        validation: Problem::precision(sample_covariance(validation)?)?,
        support: truth.support(),
        truth,
        redraws,
    })
}

fn m1_beta(p: usize) -> DVector<f64> {
    let mut b = DVector::zeros(p);
    b[0] = 3.0;
    b[1] = 1.5;
    b[4] = 2.0;
    b
}

/// Ten random coordinates set to `t * s`, `t ~ U(1, 2)`, `s = +-1`.
fn random_signals(rng: &mut ChaCha20Rng, p: usize) -> DVector<f64> {
    let mut idx = sample(rng, p, 10).into_vec();
    idx.sort_unstable();
    let mut b = DVector::zeros(p);
    for j in idx {
        let t: f64 = rng.random_range(1.0..2.0);
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        b[j] = t * s;
    }
    b
}

/// Rows from `N(0, (0.5^|i-j|))` via the AR(1) recursion.
fn ar_design(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DMatrix<f64> {
    let c = 0.75_f64.sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = rng.sample::<f64, _>(StandardNormal);
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = 0.5 * x[(i, j - 1)] + c * z;
        }
    }
    x
}

fn regression_sample(
    rng: &mut ChaCha20Rng,
    model: ModelId,
    kind: LossKind,
    n: usize,
    beta: &DVector<f64>,
) -> Result<Problem> {
    let x = ar_design(rng, n, beta.len());
    let eta = &x * beta;
    let y = match model {
        ModelId::M1 => DVector::from_fn(n, |i, _| eta[i] + rng.sample::<f64, _>(StandardNormal)),
        ModelId::M2 => DVector::from_fn(n, |i, _| {
            if rng.random_bool(sigmoid(eta[i])) {
                1.0
            } else {
                0.0
            }
        }),
        _ => DVector::from_fn(n, |i, _| {
            let u: f64 = rng.random();
            eta[i] + (std::f64::consts::PI * (u - 0.5)).tan()
        }),
    };
    Problem::regression(kind, x, y)
}

/// `(0.5^|i-j|)`, the design covariance of the regression models.
pub fn m1_covariance(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.5_f64.powi((i as i32 - j as i32).abs()))
}

/// Inverse of `sigma_ij = exp(-|s_i - s_j|)` where `gaps[k] = s_{k+1} - s_k`.
///
/// With `r_k = exp(-gaps[k])` the inverse is tridiagonal:
/// `theta_{k,k+1} = -r_k / (1 - r_k^2)` and the diagonal collects
/// `1 / (1 - r^2)` from the left link and `r^2 / (1 - r^2)` from the right.
pub fn m4_precision(gaps: &[f64]) -> DMatrix<f64> {
    let q = gaps.len() + 1;
    let r: Vec<f64> = gaps.iter().map(|g| (-g).exp()).collect();
    let mut t = DMatrix::zeros(q, q);
    t[(0, 0)] = 1.0;
    for k in 0..q - 1 {
        let d = 1.0 - r[k] * r[k];
        t[(k, k)] += r[k] * r[k] / d;
        t[(k + 1, k + 1)] += 1.0 / d;
        t[(k, k + 1)] = -r[k] / d;
        t[(k + 1, k)] = -r[k] / d;
    }
    t
}

fn m5_precision(rng: &mut ChaCha20Rng, q: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(q, q);
    let mut slots = sample(rng, q * (q - 1), M5_NONZEROS).into_vec();
    slots.sort_unstable();
    for slot in slots {
        // off-diagonal slot -> (row, col), skipping the diagonal
        let (i, mut j) = (slot / (q - 1), slot % (q - 1));
        if j >= i {
            j += 1;
        }
        let t: f64 = rng.random_range(1.0..2.0);
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        u[(i, j)] = t * s;
    }
    let mut theta = u.transpose() * &u + DMatrix::identity(q, q);
    // exact symmetry for the support and the precision problem checks
    for j in 0..q {
        for k in 0..j {
            theta[(j, k)] = theta[(k, j)];
        }
    }
    theta
}
