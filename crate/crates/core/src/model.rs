//! Problems, estimates and the four convex losses.
//!
//! Regression problems hold an `n x p` design and a response; the precision
//! problem holds a `q x q` sample covariance. Estimates are either a
//! coefficient vector or a symmetric precision matrix. None of the models
//! carry an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, log_det_spd, softplus, spd_inverse};

/// Entries with magnitude at or below this are treated as zero when
/// counting selections in simulations.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Linear,
    Logistic,
    Quantile { tau: f64 },
    Precision,
}

impl LossKind {
    pub fn label(&self) -> String {
        match self {
            LossKind::Linear => "linear".into(),
            LossKind::Logistic => "logistic".into(),
            LossKind::Quantile { tau } => format!("quantile:{tau}"),
            LossKind::Precision => "precision".into(),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(tau) = s.strip_prefix("quantile:") {
            let tau: f64 = tau
                .parse()
                .map_err(|_| Error::Validation(format!("bad quantile level '{tau}'")))?;
            check_tau(tau)?;
            return Ok(LossKind::Quantile { tau });
        }
        match s.as_str() {
            "linear" => Ok(LossKind::Linear),
            "logistic" => Ok(LossKind::Logistic),
            "precision" => Ok(LossKind::Precision),
            other => Err(Error::Validation(format!("unknown problem kind '{other}'"))),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!("quantile level must be in (0,1), got {tau}")))
    }
}

#[derive(Debug, Clone)]
enum Data {
    Regression {
        design: DMatrix<f64>,
        response: DVector<f64>,
    },
    Covariance {
        sample_cov: DMatrix<f64>,
    },
}

/// A convex loss together with its data.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: LossKind,
    data: Data,
}

impl Problem {
    pub fn linear(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        Self::regression(LossKind::Linear, design, response)
    }

    pub fn logistic(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        Self::regression(LossKind::Logistic, design, response)
    }

    pub fn quantile(design: DMatrix<f64>, response: DVector<f64>, tau: f64) -> Result<Self> {
        Self::regression(LossKind::Quantile { tau }, design, response)
    }

    pub fn regression(kind: LossKind, design: DMatrix<f64>, response: DVector<f64>) -> Result<Self> {
        if kind == LossKind::Precision {
            return Err(Error::InvalidProblem(
                "precision problems are built from a sample covariance".into(),
            ));
        }
        if design.nrows() != response.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                found: response.len(),
            });
        }
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::InvalidProblem("empty design matrix".into()));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("design or response has non-finite entries".into()));
        }
        match kind {
            LossKind::Logistic => {
                if response.iter().any(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::InvalidProblem("logistic response must be 0/1".into()));
                }
            }
            LossKind::Quantile { tau } => check_tau(tau)?,
            _ => {}
        }
        Ok(Self {
            kind,
            data: Data::Regression { design, response },
        })
    }

    pub fn precision(sample_cov: DMatrix<f64>) -> Result<Self> {
        let q = sample_cov.nrows();
        if q == 0 || sample_cov.ncols() != q {
            return Err(Error::InvalidProblem("sample covariance must be square and non-empty".into()));
        }
        if sample_cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("sample covariance has non-finite entries".into()));
        }
        for j in 0..q {
            if sample_cov[(j, j)] <= 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "sample covariance diagonal entry {j} is not positive"
                )));
            }
            for k in 0..j {
                if (sample_cov[(j, k)] - sample_cov[(k, j)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidProblem("sample covariance is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            kind: LossKind::Precision,
            data: Data::Covariance { sample_cov },
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn design(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            Data::Regression { design, .. } => Some(design),
            Data::Covariance { .. } => None,
        }
    }

    pub fn response(&self) -> Option<&DVector<f64>> {
        match &self.data {
            Data::Regression { response, .. } => Some(response),
            Data::Covariance { .. } => None,
        }
    }

    pub fn sample_cov(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            Data::Covariance { sample_cov } => Some(sample_cov),
            Data::Regression { .. } => None,
        }
    }

    pub(crate) fn regression_data(&self) -> Result<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.data {
            Data::Regression { design, response } => Ok((design, response)),
            Data::Covariance { .. } => Err(Error::Unsupported("operation needs a regression problem")),
        }
    }

    pub(crate) fn covariance(&self) -> Result<&DMatrix<f64>> {
        self.sample_cov()
            .ok_or(Error::Unsupported("operation needs a precision problem"))
    }

    /// Observations for regression problems; `None` for precision.
    pub fn n(&self) -> Option<usize> {
        self.design().map(|x| x.nrows())
    }

    /// `p` for regression problems, `q` for precision problems.
    pub fn dim(&self) -> usize {
        match &self.data {
            Data::Regression { design, .. } => design.ncols(),
            Data::Covariance { sample_cov } => sample_cov.nrows(),
        }
    }

    pub fn is_precision(&self) -> bool {
        self.kind == LossKind::Precision
    }

    pub fn zero_estimate(&self) -> Estimate {
        match &self.data {
            Data::Regression { design, .. } => Estimate::Vector(DVector::zeros(design.ncols())),
            Data::Covariance { sample_cov } => {
                let q = sample_cov.nrows();
                Estimate::Matrix(DMatrix::zeros(q, q))
            }
        }
    }

    pub(crate) fn check_estimate(&self, est: &Estimate) -> Result<()> {
        match (&self.data, est) {
            (Data::Regression { design, .. }, Estimate::Vector(b)) => {
                if b.len() == design.ncols() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: design.ncols(),
                        found: b.len(),
                    })
                }
            }
            (Data::Covariance { sample_cov }, Estimate::Matrix(t)) => {
                if t.nrows() == sample_cov.nrows() && t.ncols() == sample_cov.nrows() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch {
                        expected: sample_cov.nrows(),
                        found: t.nrows(),
                    })
                }
            }
            _ => Err(Error::Validation("estimate shape does not match the problem".into())),
        }
    }
}

/// Index set of nonzero parameters: coordinates for vectors, unordered
/// off-diagonal pairs `(j, k)` with `j < k` for precision matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Coordinates(Vec<usize>),
    Edges(Vec<(usize, usize)>),
}

impl Support {
    pub fn len(&self) -> usize {
        match self {
            Support::Coordinates(c) => c.len(),
            Support::Edges(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Boolean mask over the penalized entries of a `dim`-sized parameter.
    pub fn coordinate_mask(&self, dim: usize) -> Vec<bool> {
        let mut mask = vec![false; dim];
        if let Support::Coordinates(c) = self {
            for &j in c {
                if j < dim {
                    mask[j] = true;
                }
            }
        }
        mask
    }

    /// Symmetric edge mask for a `q x q` matrix (diagonal excluded).
    pub fn edge_mask(&self, q: usize) -> DMatrix<bool> {
        let mut mask = DMatrix::from_element(q, q, false);
        if let Support::Edges(e) = self {
            for &(j, k) in e {
                if j < q && k < q && j != k {
                    mask[(j, k)] = true;
                    mask[(k, j)] = true;
                }
            }
        }
        mask
    }
}

/// A fitted parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

impl Estimate {
    pub fn as_vector(&self) -> Option<&DVector<f64>> {
        match self {
            Estimate::Vector(v) => Some(v),
            Estimate::Matrix(_) => None,
        }
    }

    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Estimate::Matrix(m) => Some(m),
            Estimate::Vector(_) => None,
        }
    }

    /// Exact nonzeros.
    pub fn support(&self) -> Support {
        self.support_above(0.0)
    }

    /// Entries with `|value| > threshold`. For matrices an edge counts if
    /// either of its two entries is above the threshold.
    pub fn support_above(&self, threshold: f64) -> Support {
        match self {
            Estimate::Vector(v) => Support::Coordinates(
                v.iter()
                    .enumerate()
                    .filter(|(_, x)| x.abs() > threshold)
                    .map(|(j, _)| j)
                    .collect(),
            ),
            Estimate::Matrix(m) => {
                let q = m.nrows();
                let mut edges = Vec::new();
                for j in 0..q {
                    for k in (j + 1)..q {
                        if m[(j, k)].abs() > threshold || m[(k, j)].abs() > threshold {
                            edges.push((j, k));
                        }
                    }
                }
                Support::Edges(edges)
            }
        }
    }

    /// Max-norm distance; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Estimate) -> f64 {
        match (self, other) {
            (Estimate::Vector(a), Estimate::Vector(b)) if a.len() == b.len() => {
                linalg::max_abs(a.iter().zip(b.iter()).map(|(x, y)| x - y))
            }
            (Estimate::Matrix(a), Estimate::Matrix(b)) if a.shape() == b.shape() => {
                linalg::max_abs(a.iter().zip(b.iter()).map(|(x, y)| x - y))
            }
            _ => f64::INFINITY,
        }
    }

    /// Values of the penalized entries: every coordinate of a vector, the
    /// off-diagonal entries of a matrix (each ordered pair once).
    pub(crate) fn penalized_values(&self) -> Vec<f64> {
        match self {
            Estimate::Vector(v) => v.iter().copied().collect(),
            Estimate::Matrix(m) => {
                let q = m.nrows();
                let mut out = Vec::with_capacity(q * q.saturating_sub(1));
                for k in 0..q {
                    for j in 0..q {
                        if j != k {
                            out.push(m[(j, k)]);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Estimate::Vector(v) => v.len(),
            Estimate::Matrix(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A closed interval `[lo, hi]` of attainable subgradient values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Distance from `v` to the interval (0 inside).
    pub fn distance(&self, v: f64) -> f64 {
        if v < self.lo {
            self.lo - v
        } else if v > self.hi {
            v - self.hi
        } else {
            0.0
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Check-loss `rho_tau(u) = u (tau - 1{u <= 0})`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u > 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

pub(crate) fn zero_residual_tol(y: f64) -> f64 {
    1e-10 * (1.0 + y.abs())
}

pub(crate) fn linear_loss(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let r = y - x * beta;
    r.norm_squared() / (2.0 * y.len() as f64)
}

pub(crate) fn logistic_loss(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let total: f64 = eta
        .iter()
        .zip(y.iter())
        .map(|(&e, &yi)| softplus(e) - yi * e)
        .sum();
    total / y.len() as f64
}

pub(crate) fn quantile_loss(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, tau: f64) -> f64 {
    let r = y - x * beta;
    r.iter().map(|&u| check_loss(u, tau)).sum::<f64>() / y.len() as f64
}

pub(crate) fn precision_loss(s: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<f64> {
    let ld = log_det_spd(theta)?;
    Ok(-ld + theta.component_mul(s).sum())
}

/// The empirical loss at `est`.
pub fn loss_value(problem: &Problem, est: &Estimate) -> Result<f64> {
    problem.check_estimate(est)?;
    match (&problem.data, est) {
        (Data::Regression { design, response }, Estimate::Vector(b)) => Ok(match problem.kind {
            LossKind::Linear => linear_loss(design, response, b),
            LossKind::Logistic => logistic_loss(design, response, b),
            LossKind::Quantile { tau } => quantile_loss(design, response, b, tau),
            LossKind::Precision => unreachable!("regression data never has precision kind"),
        }),
        (Data::Covariance { sample_cov }, Estimate::Matrix(t)) => precision_loss(sample_cov, t),
        _ => unreachable!("checked by check_estimate"),
    }
}

/// Gradient of a differentiable loss: `X'(X b - y)/n`, `X'(mu - y)/n`, or
/// `S - Theta^{-1}`.
pub fn loss_gradient(problem: &Problem, est: &Estimate) -> Result<Estimate> {
    problem.check_estimate(est)?;
    match (&problem.data, est) {
        (Data::Regression { design, response }, Estimate::Vector(b)) => {
            let n = response.len() as f64;
            let resid = match problem.kind {
                LossKind::Linear => design * b - response,
                LossKind::Logistic => (design * b).map(linalg::sigmoid) - response,
                LossKind::Quantile { .. } => {
                    return Err(Error::Unsupported(
                        "the check loss is not differentiable; use subgradient_interval",
                    ))
                }
                LossKind::Precision => unreachable!(),
            };
            Ok(Estimate::Vector(design.tr_mul(&resid) / n))
        }
        (Data::Covariance { sample_cov }, Estimate::Matrix(t)) => {
            let inv = spd_inverse(t)?;
            Ok(Estimate::Matrix(sample_cov - inv))
        }
        _ => unreachable!(),
    }
}

/// Per-coordinate range of subgradients of the check loss at `est`.
///
/// Observations whose residual is within `1e-10 (1 + |y_i|)` of zero are
/// treated as interpolated; each contributes `-x_ij z_i / n` with
/// `z_i` free in `[tau - 1, tau]`.
pub fn subgradient_interval(problem: &Problem, est: &Estimate) -> Result<Vec<Interval>> {
    let LossKind::Quantile { tau } = problem.kind else {
        return Err(Error::Unsupported("subgradient intervals are defined for quantile problems"));
    };
    problem.check_estimate(est)?;
    let (x, y) = problem.regression_data()?;
    let beta = est.as_vector().expect("checked");
    Ok(quantile_intervals(x, y, beta, tau))
}

pub(crate) fn quantile_intervals(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    tau: f64,
) -> Vec<Interval> {
    let n = y.len();
    let r = y - x * beta;
    let nf = n as f64;
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mut center = 0.0;
            let mut lo = 0.0;
            let mut hi = 0.0;
            for i in 0..n {
                let xij = col[i];
                if r[i].abs() <= zero_residual_tol(y[i]) {
                    let a = -xij * tau;
                    let b = -xij * (tau - 1.0);
                    lo += a.min(b);
                    hi += a.max(b);
                } else {
                    let psi = if r[i] > 0.0 { tau } else { tau - 1.0 };
                    center -= xij * psi;
                }
            }
            Interval {
                lo: (center + lo) / nf,
                hi: (center + hi) / nf,
            }
        })
        .collect()
}

/// Divisor-`n` sample covariance of the rows of `data`.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let q = data.ncols();
    let mean = data.row_mean();
    let mut centered = data.clone();
    for j in 0..q {
        let m = mean[j];
        centered.column_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    let mut cov = centered.tr_mul(&centered) / n as f64;
    for j in 0..q {
        for k in 0..j {
            let v = cov[(j, k)];
            cov[(k, j)] = v;
        }
    }
    Ok(cov)
}
