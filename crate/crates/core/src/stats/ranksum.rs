use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample: `R_a - n_a(n_a+1)/2`.
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided Wilcoxon rank-sum test with midranks for ties, tie-corrected
/// variance and a 0.5 continuity correction on the normal approximation.
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<RankSum> {
    for s in [a, b] {
        if s.len() < 3 {
            return Err(Error::TooFewObservations { needed: 3, got: s.len() });
        }
        if s.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN in rank-sum sample"));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));

    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = midrank;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }

    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let nf = n as f64;
    let mean = na * nb / 2.0;
    let var = na * nb / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(RankSum { statistic: u, z: 0.0, p_value: 1.0 });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(RankSum { statistic: u, z: z * (u - mean).signum(), p_value: p })
}
