use serde::Serialize;

use crate::linalg::spectral_norm_sym;
use crate::model::{Estimate, Support, SUPPORT_THRESHOLD};

/// Estimation and selection accuracy of one fit.
///
/// Vector problems fill `l1_loss`/`l2_loss`; precision problems fill
/// `op_norm_loss`/`frob_loss`. Selection counts use unordered off-diagonal
/// pairs for precision matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub l1_loss: Option<f64>,
    pub l2_loss: Option<f64>,
    pub op_norm_loss: Option<f64>,
    pub frob_loss: Option<f64>,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub chosen_lambda: f64,
    pub validation_error: f64,
}

/// Losses against `truth` and support errors against `true_support`
/// (an entry is selected when `|value| > 1e-8`). `chosen_lambda` and
/// `validation_error` are left as NaN for the caller to fill.
pub fn compute_metrics(est: &Estimate, truth: &Estimate, true_support: &Support) -> MetricsRow {
    let mut row = MetricsRow {
        l1_loss: None,
        l2_loss: None,
        op_norm_loss: None,
        frob_loss: None,
        false_positives: 0,
        false_negatives: 0,
        chosen_lambda: f64::NAN,
        validation_error: f64::NAN,
    };
    match (est, truth) {
        (Estimate::Vector(b), Estimate::Vector(t)) => {
            let d = b - t;
            row.l1_loss = Some(d.lp_norm(1));
            row.l2_loss = Some(d.norm());
            let truth_mask = true_support.coordinate_mask(b.len());
            for (j, &v) in b.iter().enumerate() {
                let selected = v.abs() > SUPPORT_THRESHOLD;
                match (truth_mask[j], selected) {
                    (false, true) => row.false_positives += 1,
                    (true, false) => row.false_negatives += 1,
                    _ => {}
                }
            }
        }
        (Estimate::Matrix(m), Estimate::Matrix(t)) => {
            let d = m - t;
            row.op_norm_loss = Some(spectral_norm_sym(&d));
            row.frob_loss = Some(d.norm());
            let q = m.nrows();
            let truth_mask = true_support.edge_mask(q);
            for j in 0..q {
                for k in (j + 1)..q {
                    let selected = m[(j, k)].abs() > SUPPORT_THRESHOLD || m[(k, j)].abs() > SUPPORT_THRESHOLD;
                    match (truth_mask[(j, k)], selected) {
                        (false, true) => row.false_positives += 1,
                        (true, false) => row.false_negatives += 1,
                        _ => {}
                    }
                }
            }
        }
        _ => {
            row.l1_loss = Some(f64::INFINITY);
            row.l2_loss = Some(f64::INFINITY);
        }
    }
    row
}
