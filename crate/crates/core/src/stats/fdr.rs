use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Benjamini-Yekutieli false discovery rate control.
///
/// With `m` p-values sorted ascending and `c(m) = Σ_{j=1..m} 1/j`, every
/// hypothesis ranked at or below the largest `i` with
/// `p(i) ≤ i·q / (m·c(m))` is accepted. The mask is returned in input order.
pub fn by_stepdown(pvalues: &[f64], q: f64) -> Result<Vec<bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("FDR level {q} outside (0, 1)")));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvalues.len();
    let mut accepted = vec![false; m];
    if m == 0 {
        return Ok(accepted);
    }
    let harmonic: f64 = (1..=m).map(|j| 1.0 / j as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|(rank, &idx)| pvalues[idx] <= (rank + 1) as f64 * q / (m as f64 * harmonic))
        .map(|(rank, _)| rank);
    if let Some(last) = cutoff {
        for &idx in &order[..=last] {
            accepted[idx] = true;
        }
    }
    Ok(accepted)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueEntry {
    pub row_feature: String,
    pub col_feature: String,
    pub statistic: f64,
    pub p_value: f64,
    pub accepted: bool,
}

/// Hold-out test results for a batch of proposed pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueReport {
    pub pairs: Vec<PValueEntry>,
    pub fdr_level: f64,
    pub holdout_n: usize,
}

impl PValueReport {
    /// Runs [`by_stepdown`] over `(row, col, statistic, p)` tuples.
    pub fn build(pairs: Vec<(String, String, f64, f64)>, fdr_level: f64, holdout_n: usize) -> Result<Self> {
        let p: Vec<f64> = pairs.iter().map(|t| t.3).collect();
        let mask = by_stepdown(&p, fdr_level)?;
        let pairs = pairs
            .into_iter()
            .zip(mask)
            .map(|((row_feature, col_feature, statistic, p_value), accepted)| PValueEntry {
                row_feature,
                col_feature,
                statistic,
                p_value,
                accepted,
            })
            .collect();
        Ok(Self { pairs, fdr_level, holdout_n })
    }

    pub fn accepted_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.accepted).count()
    }
}
