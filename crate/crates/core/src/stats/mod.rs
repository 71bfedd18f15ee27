//! Statistical primitives used by every matching method.

mod fdr;
mod mi;
mod ranksum;
mod similarity;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub use fdr::{by_stepdown, PValueReport};
pub use mi::{discretize, entropy, mutual_information, mutual_information_codes, Discretized, DEFAULT_MI_BINS};
pub use ranksum::{wilcoxon_ranksum, RankSum};
pub use similarity::{DependenceMeasure, SimilarityMatrix};

/// A dependence value together with a flag telling whether it was computed
/// from a degenerate input (zero variance, zero vector, constant column), in
/// which case the value is 0 by convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dependence {
    pub value: f64,
    pub degenerate: bool,
}

impl Dependence {
    pub(crate) fn degenerate() -> Self {
        Self { value: 0.0, degenerate: true }
    }
}

/// Sample Pearson correlation. Requires at least three paired observations.
pub fn pearson(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Dependence> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Dependence::degenerate());
    }
    Ok(Dependence { value: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), degenerate: false })
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`; 0 and degenerate when either vector is zero.
pub fn cosine(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<Dependence> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(Dependence::degenerate());
    }
    Ok(Dependence { value: (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0), degenerate: false })
}

/// Two-sided p-value of a sample correlation `r` over `n` observations
/// against the null of zero correlation, using the Student-t distribution
/// with `n - 2` degrees of freedom.
pub fn pearson_pvalue(r: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    if r.is_nan() || r.abs() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("correlation {r} outside [-1, 1]")));
    }
    let r2 = (r * r).min(1.0);
    if r2 >= 1.0 {
        return Ok(0.0);
    }
    // P(|T| > t) = I_{df/(df+t²)}(df/2, 1/2) and df/(df+t²) = 1 - r².
    let df = (n - 2) as f64;
    Ok(statrs::function::beta::beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0))
}

/// Pearson correlation between every column of `a` and every column of `b`
/// (rows paired). Zero-variance columns give 0 with the degenerate flag set.
pub fn cross_correlation(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<bool>)> {
    if a.nrows() != b.nrows() {
        return Err(Error::LengthMismatch { left: a.nrows(), right: b.nrows() });
    }
    if a.nrows() < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: a.nrows() });
    }
    let (za, da) = standardized_columns(a);
    let (zb, db) = standardized_columns(b);
    let mut r = za.t().dot(&zb);
    let mut degenerate = Array2::from_elem(r.dim(), false);
    for ((i, j), v) in r.indexed_iter_mut() {
        if da[i] || db[j] {
            *v = 0.0;
            degenerate[[i, j]] = true;
        } else {
            *v = v.clamp(-1.0, 1.0);
        }
    }
    Ok((r, degenerate))
}

/// Columns centered and scaled to unit Euclidean norm, so that the inner
/// product of two columns is their correlation.
fn standardized_columns(x: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<bool>) {
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let mut z = &x - &mean;
    let mut degenerate = Vec::with_capacity(z.ncols());
    for mut col in z.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 && norm.is_finite() {
            col /= norm;
            degenerate.push(false);
        } else {
            col.fill(0.0);
            degenerate.push(true);
        }
    }
    (z, degenerate)
}
