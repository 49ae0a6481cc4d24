use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeMatrix;

/// Structure recovery over the pairs `i < j` plus entrywise estimation
/// error. Rates are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub mcc: Option<f64>,
    pub scaled_l1: f64,
}

/// Mean absolute entrywise difference.
pub fn scaled_l1(omega_hat: &DMatrix<f64>, omega_true: &DMatrix<f64>) -> Result<f64> {
    if omega_hat.shape() != omega_true.shape() {
        return Err(Error::input("precision matrices differ in shape"));
    }
    let p = omega_true.nrows();
    Ok(omega_hat.iter().zip(omega_true.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / (p * p) as f64)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn score(estimated: &EdgeMatrix, truth: &EdgeMatrix, omega_hat: &DMatrix<f64>, omega_true: &DMatrix<f64>) -> Result<MetricsReport> {
    let p = truth.dim();
    if estimated.dim() != p || omega_true.nrows() != p {
        return Err(Error::input(format!("dimension mismatch: estimated {}, truth {p}", estimated.dim())));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for i in 0..p {
        for j in i + 1..p {
            match (estimated.has_edge(i, j), truth.has_edge(i, j)) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
    }
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = (!marginals.contains(&0)).then(|| {
        let den: f64 = marginals.iter().map(|m| *m as f64).product::<f64>().sqrt();
        (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / den
    });
    Ok(MetricsReport {
        tp,
        tn,
        fp,
        fn_,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        mcc,
        scaled_l1: scaled_l1(omega_hat, omega_true)?,
    })
}
