//! Cyclic coordinate descent for `min 0.5 b'G b - c'b + sum_j w_j |b_j|`.
//!
//! The Gram matrix is reached column by column through [`GramColumns`], so
//! the linear solver can compute `X'x_j / n` lazily for the coordinates that
//! ever become active (covariance updates) while the Newton and graphical
//! lasso solvers pass a dense matrix.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{soft_threshold, spd_solve};

pub(crate) trait GramColumns {
    fn dim(&self) -> usize;
    fn diag(&self, j: usize) -> f64;
    fn column(&mut self, j: usize) -> &[f64];
}

pub(crate) struct DenseGram<'a> {
    gram: &'a DMatrix<f64>,
}

impl<'a> DenseGram<'a> {
    pub(crate) fn new(gram: &'a DMatrix<f64>) -> Self {
        Self { gram }
    }
}

impl GramColumns for DenseGram<'_> {
    fn dim(&self) -> usize {
        self.gram.ncols()
    }

    fn diag(&self, j: usize) -> f64 {
        self.gram[(j, j)]
    }

    fn column(&mut self, j: usize) -> &[f64] {
        let n = self.gram.nrows();
        &self.gram.as_slice()[j * n..(j + 1) * n]
    }
}

/// `X'X / n`, one cached column at a time.
pub(crate) struct DesignGram<'a> {
    design: &'a DMatrix<f64>,
    diag: Vec<f64>,
    cache: Vec<Option<Vec<f64>>>,
}

impl<'a> DesignGram<'a> {
    pub(crate) fn new(design: &'a DMatrix<f64>) -> Self {
        let n = design.nrows() as f64;
        let diag = design.column_iter().map(|c| c.norm_squared() / n).collect();
        Self {
            design,
            diag,
            cache: vec![None; design.ncols()],
        }
    }
}

impl GramColumns for DesignGram<'_> {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn diag(&self, j: usize) -> f64 {
        self.diag[j]
    }

    fn column(&mut self, j: usize) -> &[f64] {
        if self.cache[j].is_none() {
            let n = self.design.nrows() as f64;
            let xj = self.design.column(j);
            let col = self.design.tr_mul(&xj).iter().map(|v| v / n).collect();
            self.cache[j] = Some(col);
        }
        self.cache[j].as_deref().expect("filled above")
    }
}

pub(crate) struct CdOutcome {
    pub sweeps: usize,
    pub kkt: f64,
    pub converged: bool,
}

/// KKT residual of the quadratic problem given its gradient `g = G b - c`.
pub(crate) fn quadratic_kkt(g: &[f64], w: &[f64], b: &[f64]) -> f64 {
    g.iter()
        .zip(w)
        .zip(b)
        .map(|((&g, &w), &b)| {
            if b > 0.0 {
                (g + w).abs()
            } else if b < 0.0 {
                (g - w).abs()
            } else {
                (g.abs() - w).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn gradient<G: GramColumns>(gram: &mut G, c: &[f64], b: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = c.iter().map(|v| -v).collect();
    for (j, &bj) in b.iter().enumerate() {
        if bj != 0.0 {
            let col = gram.column(j);
            for (gi, ci) in g.iter_mut().zip(col) {
                *gi += bj * ci;
            }
        }
    }
    g
}

fn update<G: GramColumns>(gram: &mut G, j: usize, w: f64, b: &mut [f64], g: &mut [f64]) -> f64 {
    let hjj = gram.diag(j);
    if hjj <= 0.0 {
        return 0.0;
    }
    let old = b[j];
    let new = soft_threshold(hjj * old - g[j], w) / hjj;
    let delta = new - old;
    if delta != 0.0 {
        let col = gram.column(j);
        for (gi, ci) in g.iter_mut().zip(col) {
            *gi += delta * ci;
        }
        b[j] = new;
    }
    delta.abs()
}

/// Runs active-set coordinate descent from `b`, then tries to polish the
/// result by an exact solve on the active set with signs held fixed.
pub(crate) fn quadratic_cd<G: GramColumns>(
    gram: &mut G,
    c: &[f64],
    w: &[f64],
    b: &mut [f64],
    tol: f64,
    max_sweeps: usize,
) -> CdOutcome {
    let p = gram.dim();
    let mut g = gradient(gram, c, b);
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < max_sweeps {
        // full pass decides the active set
        let mut change = 0.0_f64;
        for (j, &wj) in w.iter().enumerate() {
            change = change.max(update(gram, j, wj, b, &mut g));
        }
        sweeps += 1;
        let scale = 1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if change <= tol * scale && quadratic_kkt(&g, w, b) <= tol {
            converged = true;
            break;
        }

        let active: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
        while sweeps < max_sweeps {
            let mut change = 0.0_f64;
            for &j in &active {
                change = change.max(update(gram, j, w[j], b, &mut g));
            }
            sweeps += 1;
            let scale = 1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if change <= 0.1 * tol * scale {
                break;
            }
        }
    }

    // refresh the gradient to shed accumulated rounding
    g = gradient(gram, c, b);
    let mut kkt = quadratic_kkt(&g, w, b);
    if let Some(polished) = polish(gram, c, w, b, tol) {
        b.copy_from_slice(&polished.0);
        kkt = polished.1;
        converged = true;
    } else if kkt <= tol {
        converged = true;
    }
    CdOutcome {
        sweeps,
        kkt,
        converged,
    }
}

/// Exact minimizer on the current active set with the current signs; kept
/// only if signs survive and the full KKT residual is within `tol`.
fn polish<G: GramColumns>(
    gram: &mut G,
    c: &[f64],
    w: &[f64],
    b: &[f64],
    tol: f64,
) -> Option<(Vec<f64>, f64)> {
    let active: Vec<usize> = (0..b.len()).filter(|&j| b[j] != 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let k = active.len();
    let mut sub = DMatrix::zeros(k, k);
    for (col, &j) in active.iter().enumerate() {
        let gj = gram.column(j);
        for (row, &i) in active.iter().enumerate() {
            sub[(row, col)] = gj[i];
        }
    }
    let rhs = DVector::from_iterator(
        k,
        active.iter().map(|&j| c[j] - w[j] * b[j].signum()),
    );
    let z = spd_solve(&sub, &rhs)?;
    let mut out = vec![0.0; b.len()];
    for (row, &j) in active.iter().enumerate() {
        if z[row] == 0.0 || z[row].signum() != b[j].signum() || !z[row].is_finite() {
            return None;
        }
        out[j] = z[row];
    }
    let g = gradient(gram, c, &out);
    let kkt = quadratic_kkt(&g, w, &out);
    (kkt <= tol).then_some((out, kkt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_gram_is_soft_threshold() {
        let gram = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
        let c = [2.0, -0.5, -3.0];
        let w = [1.0, 1.0, 0.5];
        let mut b = [0.0; 3];
        let out = quadratic_cd(&mut DenseGram::new(&gram), &c, &w, &mut b, 1e-12, 100);
        assert!(out.converged);
        assert_eq!(b, [1.0, 0.0, -2.5]);
    }

    #[test]
    fn unpenalized_solves_linear_system() {
        let gram = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = [1.0, 1.0];
        let mut b = [0.0; 2];
        let out = quadratic_cd(&mut DenseGram::new(&gram), &c, &[0.0, 0.0], &mut b, 1e-12, 1000);
        assert!(out.converged);
        let exact = spd_solve(&gram, &DVector::from_vec(c.to_vec())).unwrap();
        assert!((b[0] - exact[0]).abs() < 1e-14 && (b[1] - exact[1]).abs() < 1e-14);
    }
}
