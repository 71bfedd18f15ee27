use ndarray::ArrayView1;

use super::Dependence;
use crate::error::{Error, Result};

pub const DEFAULT_MI_BINS: usize = 8;

/// A column mapped to integer codes `0..levels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discretized {
    pub codes: Vec<usize>,
    pub levels: usize,
}

/// Equal-frequency binning. Columns with at most `bins` distinct values
/// (binary columns in particular) keep their natural levels. Tied values
/// always land in the same bin.
pub fn discretize(x: ArrayView1<'_, f64>, bins: usize) -> Result<Discretized> {
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 bins, got {bins}")));
    }
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut distinct = 0usize;
    for w in order.windows(2) {
        if x[w[0]] != x[w[1]] {
            distinct += 1;
        }
    }
    if n > 0 {
        distinct += 1;
    }

    let mut codes = vec![0usize; n];
    if distinct <= bins {
        let mut level = 0;
        for (pos, &idx) in order.iter().enumerate() {
            if pos > 0 && x[idx] != x[order[pos - 1]] {
                level += 1;
            }
            codes[idx] = level;
        }
        return Ok(Discretized { codes, levels: distinct.max(1) });
    }

    let mut bin = 0;
    for (pos, &idx) in order.iter().enumerate() {
        if pos > 0 && x[idx] != x[order[pos - 1]] {
            bin = pos * bins / n;
        }
        codes[idx] = bin;
    }
    Ok(Discretized { codes, levels: bins })
}

/// Plug-in Shannon entropy (nats) of a discretized column.
pub fn entropy(d: &Discretized) -> f64 {
    let n = d.codes.len() as f64;
    let mut counts = vec![0usize; d.levels];
    for &c in &d.codes {
        counts[c] += 1;
    }
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Plug-in mutual information (nats) of two discretized columns.
pub fn mutual_information_codes(x: &Discretized, y: &Discretized) -> Result<Dependence> {
    if x.codes.len() != y.codes.len() {
        return Err(Error::LengthMismatch { left: x.codes.len(), right: y.codes.len() });
    }
    let n = x.codes.len();
    if n == 0 || count_used(x) < 2 || count_used(y) < 2 {
        return Ok(Dependence::degenerate());
    }
    let mut joint = vec![0usize; x.levels * y.levels];
    let mut px = vec![0usize; x.levels];
    let mut py = vec![0usize; y.levels];
    for (&a, &b) in x.codes.iter().zip(&y.codes) {
        joint[a * y.levels + b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..x.levels {
        for b in 0..y.levels {
            let c = joint[a * y.levels + b];
            if c > 0 {
                let pxy = c as f64 / nf;
                mi += pxy * (c as f64 * nf / (px[a] as f64 * py[b] as f64)).ln();
            }
        }
    }
    Ok(Dependence { value: mi.max(0.0), degenerate: false })
}

fn count_used(d: &Discretized) -> usize {
    let mut seen = vec![false; d.levels];
    d.codes.iter().for_each(|&c| seen[c] = true);
    seen.into_iter().filter(|&s| s).count()
}

/// Mutual information between two columns after quantile binning each into
/// `bins` bins. A constant column yields 0 with the degenerate flag.
pub fn mutual_information(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, bins: usize) -> Result<Dependence> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    mutual_information_codes(&discretize(x, bins)?, &discretize(y, bins)?)
}
