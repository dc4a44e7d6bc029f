//! Linear-programming formulations of the piecewise-linear problems
//! (weighted-l1 quantile regression and CLIME columns).

use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_loss, zero_residual_tol};

/// Residuals this close to zero after the simplex are treated as
/// interpolated when snapping to an exact vertex.
const SNAP_TOL: f64 = 1e-7;

fn map_lp_error(context: &str, e: microlp::Error) -> Error {
    match e {
        microlp::Error::Infeasible => Error::Domain(format!("{context}: linear program is infeasible")),
        microlp::Error::Unbounded => Error::Domain(format!("{context}: linear program is unbounded")),
        other => Error::Singular(format!("{context}: {other}")),
    }
}

pub(crate) fn quantile_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    w: &[f64],
    beta: &DVector<f64>,
) -> f64 {
    let r = y - x * beta;
    let n = y.len() as f64;
    r.iter().map(|&u| check_loss(u, tau)).sum::<f64>() / n
        + w.iter().zip(beta.iter()).map(|(w, b)| w * b.abs()).sum::<f64>()
}

/// `min n^{-1} sum rho_tau(y - X b) + sum_j w_j |b_j|` over `b` supported on
/// `columns`.
pub(crate) fn quantile_lp(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    w: &[f64],
    columns: &[usize],
) -> Result<DVector<f64>> {
    let n = y.len();
    let nf = n as f64;
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    // each column is either a free variable (w = 0) or a +/- split
    let mut coef_vars = Vec::with_capacity(columns.len());
    for &j in columns {
        if w[j] == 0.0 {
            let v = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
            coef_vars.push((j, v, None));
        } else {
            let plus = lp.add_var(w[j], (0.0, f64::INFINITY));
            let minus = lp.add_var(w[j], (0.0, f64::INFINITY));
            coef_vars.push((j, plus, Some(minus)));
        }
    }
    for i in 0..n {
        let up = lp.add_var(tau / nf, (0.0, f64::INFINITY));
        let down = lp.add_var((1.0 - tau) / nf, (0.0, f64::INFINITY));
        let mut expr: Vec<(microlp::Variable, f64)> = Vec::with_capacity(2 * columns.len() + 2);
        for &(j, plus, minus) in &coef_vars {
            let xij = x[(i, j)];
            if xij != 0.0 {
                expr.push((plus, xij));
                if let Some(m) = minus {
                    expr.push((m, -xij));
                }
            }
        }
        expr.push((up, 1.0));
        expr.push((down, -1.0));
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, y[i]);
    }
    let solution = lp
        .solve()
        .map_err(|e| map_lp_error("quantile regression", e))?
        .into_solution()
        .map_err(|_| Error::Singular("quantile regression LP was interrupted".into()))?;
    let mut beta = DVector::zeros(x.ncols());
    for &(j, plus, minus) in &coef_vars {
        let v = solution.var_value(plus) - minus.map_or(0.0, |m| solution.var_value(m));
        beta[j] = v;
    }
    Ok(snap_to_vertex(x, y, tau, w, beta))
}

/// Re-solves the interpolation equations of the simplex vertex in full
/// precision: the nonzero coefficients are pinned by the observations the
/// LP fits exactly. Kept only if the objective does not get worse.
fn snap_to_vertex(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: f64,
    w: &[f64],
    mut beta: DVector<f64>,
) -> DVector<f64> {
    for b in beta.iter_mut() {
        if b.abs() <= 1e-13 {
            *b = 0.0;
        }
    }
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() {
        return beta;
    }
    let r = y - x * &beta;
    let mut fitted: Vec<usize> = (0..y.len())
        .filter(|&i| r[i].abs() <= SNAP_TOL * (1.0 + y[i].abs()))
        .collect();
    let already_exact = fitted.iter().all(|&i| r[i].abs() <= zero_residual_tol(y[i]));
    if already_exact || fitted.len() < active.len() {
        return beta;
    }
    fitted.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()));
    let sub = DMatrix::from_fn(fitted.len(), active.len(), |r, c| x[(fitted[r], active[c])]);
    let rhs = DVector::from_iterator(fitted.len(), fitted.iter().map(|&i| y[i]));
    let Ok(z) = sub.clone().svd(true, true).solve(&rhs, 1e-12) else {
        return beta;
    };
    let mut candidate = beta.clone();
    for (k, &j) in active.iter().enumerate() {
        candidate[j] = z[k];
    }
    let before = quantile_objective(x, y, tau, w, &beta);
    let after = quantile_objective(x, y, tau, w, &candidate);
    if after <= before + 1e-12 * (1.0 + before.abs()) {
        candidate
    } else {
        beta
    }
}

/// One CLIME column: `min |t|_1` subject to `|S t - e_j|_inf <= lambda`.
pub(crate) fn clime_column_lp(s: &DMatrix<f64>, j: usize, lambda: f64) -> Result<DVector<f64>> {
    let q = s.nrows();
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let plus: Vec<_> = (0..q).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let minus: Vec<_> = (0..q).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..q {
        let mut expr = Vec::with_capacity(2 * q);
        for k in 0..q {
            let v = s[(i, k)];
            if v != 0.0 {
                expr.push((plus[k], v));
                expr.push((minus[k], -v));
            }
        }
        let target = if i == j { 1.0 } else { 0.0 };
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, target + lambda);
        lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, target - lambda);
    }
    let solution = lp
        .solve()
        .map_err(|e| map_lp_error("CLIME column", e))?
        .into_solution()
        .map_err(|_| Error::Singular("CLIME LP was interrupted".into()))?;
    Ok(DVector::from_fn(q, |k, _| {
        let v = solution.var_value(plus[k]) - solution.var_value(minus[k]);
        if v.abs() <= 1e-13 {
            0.0
        } else {
            v
        }
    }))
}
