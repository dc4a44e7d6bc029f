use super::{ExperimentConfig, InitSpec, MethodSpec, Replication};
use crate::error::{Error, Result};
use crate::linalg::softplus;
use crate::lla::{lla_run, make_initializer, InitializerKind, LlaConfig};
use crate::model::{check_loss, loss_gradient, precision_loss, subgradient_interval, Estimate, LossKind, Problem};
use crate::penalty::PenaltySpec;
use crate::wl1::{solve_clime, solve_weighted_l1, Weights};

/// Validation error of `est`: the sum over validation observations of the
/// squared residual (linear), the logistic deviance term
/// `-y x'b + log(1 + e^{x'b})`, or the check loss; for precision problems
/// `-log det Theta + <Theta, S_val>`.
pub fn validation_error(validation: &Problem, est: &Estimate) -> Result<f64> {
    validation.check_estimate(est)?;
    if let LossKind::Precision = validation.kind() {
        let theta = est.as_matrix().expect("checked");
        return precision_loss(validation.covariance()?, theta);
    }
    let (x, y) = validation.regression_data()?;
    let eta = x * est.as_vector().expect("checked");
    let terms = eta.iter().zip(y.iter());
    Ok(match validation.kind() {
        LossKind::Linear => terms.map(|(e, y)| (y - e) * (y - e)).sum(),
        LossKind::Logistic => terms.map(|(e, y)| -y * e + softplus(*e)).sum(),
        LossKind::Quantile { tau } => terms.map(|(e, y)| check_loss(y - e, tau)).sum(),
        LossKind::Precision => unreachable!(),
    })
}

/// Smallest uniform weight whose weighted-l1 solution is zero (regression)
/// or diagonal (precision).
pub fn lambda_max(problem: &Problem) -> Result<f64> {
    let zero = problem.zero_estimate();
    let v = match problem.kind() {
        LossKind::Linear | LossKind::Logistic => {
            let g = loss_gradient(problem, &zero)?;
            g.as_vector().expect("vector").amax()
        }
        LossKind::Quantile { .. } => subgradient_interval(problem, &zero)?
            .iter()
            .map(|iv| iv.max_abs())
            .fold(0.0, f64::max),
        LossKind::Precision => {
            let s = problem.covariance()?;
            let q = s.nrows();
            let mut m = 0.0_f64;
            for j in 0..q {
                for k in 0..q {
                    if j != k {
                        m = m.max(s[(j, k)].abs());
                    }
                }
            }
            m
        }
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "cannot build a lambda grid: lambda_max = {v}"
        )));
    }
    Ok(v)
}

pub fn lambda_grid_for(config: &ExperimentConfig, train: &Problem) -> Result<Vec<f64>> {
    config.lambda_grid.validate()?;
    match config.lambda_grid.values {
        Some(ref v) => Ok(v.clone()),
        None => Ok(config.lambda_grid.resolve(lambda_max(train)?)),
    }
}

/// Outcome of tuning one method over the grid.
#[derive(Debug, Clone)]
pub struct TuneResult {
    pub lambda: f64,
    pub estimate: Estimate,
    pub validation_error: f64,
    /// Ascending grid and the validation error at each point (`None` where
    /// the fit failed).
    pub grid: Vec<f64>,
    pub errors: Vec<Option<f64>>,
    pub failures: usize,
}

/// Per-replication state: the data, its grid, and the tuned uniform-weight
/// and CLIME fits that serve as "*" starts.
pub struct RepContext<'a> {
    pub config: &'a ExperimentConfig,
    pub rep: &'a Replication,
    pub grid: Vec<f64>,
    tuned_lasso: Option<TuneResult>,
    tuned_clime: Option<TuneResult>,
}

impl<'a> RepContext<'a> {
    pub fn new(config: &'a ExperimentConfig, rep: &'a Replication) -> Result<Self> {
        let grid = lambda_grid_for(config, &rep.train)?;
        Ok(Self {
            config,
            rep,
            grid,
            tuned_lasso: None,
            tuned_clime: None,
        })
    }

    fn tuned(&mut self, method: MethodSpec) -> Result<&TuneResult> {
        let cached = match method {
            MethodSpec::Clime => self.tuned_clime.is_some(),
            _ => self.tuned_lasso.is_some(),
        };
        if !cached {
            let t = tune_over_grid(self, method)?;
            match method {
                MethodSpec::Clime => self.tuned_clime = Some(t),
                _ => self.tuned_lasso = Some(t),
            }
        }
        Ok(match method {
            MethodSpec::Clime => self.tuned_clime.as_ref(),
            _ => self.tuned_lasso.as_ref(),
        }
        .expect("filled above"))
    }
}

/// The starting estimate for an LLA method.
pub fn resolve_initial(ctx: &mut RepContext<'_>, init: InitSpec) -> Result<Estimate> {
    let train = &ctx.rep.train;
    let precision = train.is_precision();
    let opts = ctx.config.solver;
    match init {
        InitSpec::Null if precision => make_initializer(InitializerKind::DiagInverse, train, &opts),
        InitSpec::Null => make_initializer(InitializerKind::Zero, train, &opts),
        InitSpec::Fixed(l) if precision => make_initializer(InitializerKind::Clime(l), train, &opts),
        InitSpec::Fixed(l) => make_initializer(InitializerKind::LassoTuned(l), train, &opts),
        InitSpec::Truth => Ok(ctx.rep.truth.clone()),
        InitSpec::Tuned => {
            let base = if precision { MethodSpec::Clime } else { MethodSpec::Lasso };
            Ok(ctx.tuned(base)?.estimate.clone())
        }
    }
}

/// Fits `method` at level `lambda` on the training data.
pub fn fit_method(
    ctx: &mut RepContext<'_>,
    method: MethodSpec,
    lambda: f64,
    warm: Option<&Estimate>,
) -> Result<Estimate> {
    let opts = ctx.config.solver;
    match method {
        MethodSpec::Lasso => {
            let w = Weights::uniform(&ctx.rep.train, lambda)?;
            Ok(solve_weighted_l1(&ctx.rep.train, &w, &opts, warm)?.estimate)
        }
        MethodSpec::Clime => Ok(solve_clime(ctx.rep.train.covariance()?, lambda, &opts)?.estimate),
        MethodSpec::Lla { family, a, mode, init } => {
            let penalty = PenaltySpec::new(family, lambda, a.unwrap_or(family.default_a()))?;
            let initial = resolve_initial(ctx, init)?;
            let mut cfg = LlaConfig::new(mode, penalty);
            cfg.solver_opts = opts;
            cfg.max_lla_iters = ctx.config.max_lla_iters;
            Ok(lla_run(&ctx.rep.train, &cfg, &initial)?.0)
        }
    }
}

/// Fits `method` over the whole grid and keeps the level with the smallest
/// validation error, breaking ties toward the larger level.
pub fn tune_lambda(ctx: &mut RepContext<'_>, method: MethodSpec) -> Result<TuneResult> {
    match method {
        MethodSpec::Lasso | MethodSpec::Clime => ctx.tuned(method).cloned(),
        _ => tune_over_grid(ctx, method),
    }
}

fn tune_over_grid(ctx: &mut RepContext<'_>, method: MethodSpec) -> Result<TuneResult> {
    let grid = ctx.grid.clone();
    let mut errors = vec![None; grid.len()];
    let mut best: Option<(usize, f64, Estimate)> = None;
    let mut last_err = None;
    let mut failures = 0;
    let mut warm: Option<Estimate> = None;

    // largest level first: warm starts follow the path, and a strict
    // comparison keeps the larger level on ties
    for i in (0..grid.len()).rev() {
        let fit = fit_method(ctx, method, grid[i], warm.as_ref())
            .and_then(|est| validation_error(&ctx.rep.validation, &est).map(|e| (est, e)));
        match fit {
            Ok((est, err)) if err.is_finite() => {
                errors[i] = Some(err);
                if best.as_ref().is_none_or(|(_, b, _)| err < *b) {
                    best = Some((i, err, est.clone()));
                }
                warm = Some(est);
            }
            Ok((_, err)) => {
                failures += 1;
                last_err = Some(Error::Domain(format!("validation error is {err}")));
            }
            Err(e) => {
                failures += 1;
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((i, err, estimate)) => Ok(TuneResult {
            lambda: grid[i],
            estimate,
            validation_error: err,
            grid,
            errors,
            failures,
        }),
        None => Err(Error::TuningFailed {
            attempts: grid.len(),
            last: Box::new(last_err.unwrap_or_else(|| Error::Validation("empty grid".into()))),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{generate, LambdaGrid, ModelId};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn zero_residuals_give_zero_error() {
        let x = DMatrix::from_fn(4, 2, |i, j| (i + j) as f64);
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let y = &x * &b;
        let p = Problem::linear(x, y).unwrap();
        assert_eq!(validation_error(&p, &Estimate::Vector(b)).unwrap(), 0.0);
    }

    #[test]
    fn identity_precision_error_is_trace() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let p = Problem::precision(s).unwrap();
        let e = validation_error(&p, &Estimate::Matrix(DMatrix::identity(2, 2))).unwrap();
        assert!((e - 2.5).abs() < 1e-15);
    }

    #[test]
    fn lambda_max_zeroes_the_lasso() {
        let cfg = ExperimentConfig::new(ModelId::M1, 40, 30, vec![MethodSpec::Lasso], 1, 1);
        let rep = generate(&cfg, 0).unwrap();
        let lm = lambda_max(&rep.train).unwrap();
        let ctx = RepContext::new(&cfg, &rep).unwrap();
        assert_eq!(ctx.grid.len(), 50);
        let w = Weights::uniform(&rep.train, lm).unwrap();
        let fit = solve_weighted_l1(&rep.train, &w, &cfg.solver, None).unwrap();
        assert!(fit.estimate.as_vector().unwrap().iter().all(|v| *v == 0.0));
        let w = Weights::uniform(&rep.train, 0.9 * lm).unwrap();
        let fit = solve_weighted_l1(&rep.train, &w, &cfg.solver, None).unwrap();
        assert!(fit.estimate.as_vector().unwrap().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn single_point_grid_and_argmin() {
        let mut cfg = ExperimentConfig::new(ModelId::M1, 50, 20, vec![MethodSpec::Lasso], 1, 3);
        cfg.lambda_grid = LambdaGrid::explicit(vec![0.3]);
        let rep = generate(&cfg, 0).unwrap();
        let mut ctx = RepContext::new(&cfg, &rep).unwrap();
        let t = tune_lambda(&mut ctx, MethodSpec::Lasso).unwrap();
        assert_eq!(t.lambda, 0.3);

        cfg.lambda_grid = LambdaGrid::default();
        let mut ctx = RepContext::new(&cfg, &rep).unwrap();
        let t = tune_lambda(&mut ctx, MethodSpec::Lasso).unwrap();
        let min = t.errors.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(t.validation_error, min);
        let i = t.grid.iter().position(|l| *l == t.lambda).unwrap();
        assert_eq!(t.errors[i], Some(min));
    }

    #[test]
    fn ties_go_to_the_larger_lambda() {
        // every level above lambda_max gives the zero fit and the same error
        let mut cfg = ExperimentConfig::new(ModelId::M1, 30, 10, vec![MethodSpec::Lasso], 1, 5);
        cfg.lambda_grid = LambdaGrid::explicit(vec![100.0, 200.0, 300.0]);
        let rep = generate(&cfg, 0).unwrap();
        let mut ctx = RepContext::new(&cfg, &rep).unwrap();
        let t = tune_lambda(&mut ctx, MethodSpec::Lasso).unwrap();
        assert_eq!(t.lambda, 300.0);
        assert_eq!(t.errors[0], t.errors[2]);
    }
}
