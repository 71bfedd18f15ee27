//! Mutual-information baseline: each database is summarized by its matrix of
//! pairwise column MI, and an assignment of B's columns to A's is searched for
//! that makes the two matrices agree.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMeta};
use crate::error::{Error, Result};
use crate::matcher::MatchProposal;
use crate::rng::{rng_for, Rng};
use crate::stats::{discretize, entropy, mutual_information_codes, DEFAULT_MI_BINS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KangMetric {
    /// Minimize `Σ_{i<j} (MI_A(i,j) − MI_B(π i, π j))²`.
    Euclidean,
    /// Maximize `Σ_{i<j} exp(−(MI_A(i,j) − MI_B(π i, π j))² / α)`.
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KangConfig {
    pub metric: KangMetric,
    pub alpha: f64,
    /// Objective evaluations, the initial one included.
    pub iterations: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for KangConfig {
    fn default() -> Self {
        Self { metric: KangMetric::Euclidean, alpha: 0.01, iterations: 3000, bins: DEFAULT_MI_BINS, seed: 0 }
    }
}

impl KangConfig {
    /// Normal metric with its usual budget.
    pub fn normal(alpha: f64) -> Self {
        Self { metric: KangMetric::Normal, alpha, iterations: 5000, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("Kang search needs at least one iteration"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Pairwise MI between columns; the diagonal holds each column's entropy.
pub fn mi_matrix(ds: &Dataset, bins: usize) -> Result<Array2<f64>> {
    let p = ds.n_features();
    if p < 2 {
        return Err(Error::invalid(format!("MI matrix needs at least 2 columns, got {p}")));
    }
    let codes = (0..p).map(|j| discretize(ds.column(j), bins)).collect::<Result<Vec<_>>>()?;
    let mut m = Array2::zeros((p, p));
    for i in 0..p {
        m[[i, i]] = entropy(&codes[i]);
        for j in 0..i {
            let v = mutual_information_codes(&codes[i], &codes[j])?.value;
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(m)
}

/// Result of the assignment search: `assignment[i]` is the B index placed at
/// A index `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct KangAssignment {
    pub assignment: Vec<usize>,
    pub objective: f64,
}

fn term(metric: KangMetric, alpha: f64, d: f64) -> f64 {
    match metric {
        KangMetric::Euclidean => -d * d,
        KangMetric::Normal => (-d * d / alpha).exp(),
    }
}

/// Objective to maximize (the Euclidean metric is negated).
pub fn kang_objective(mi_a: &Array2<f64>, mi_b: &Array2<f64>, assignment: &[usize], metric: KangMetric, alpha: f64) -> f64 {
    let p = assignment.len();
    let mut s = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            s += term(metric, alpha, mi_a[[i, j]] - mi_b[[assignment[i], assignment[j]]]);
        }
    }
    s
}

/// Change in objective from swapping the B partners of A positions `u`, `v`.
fn swap_delta(mi_a: &Array2<f64>, mi_b: &Array2<f64>, pi: &[usize], u: usize, v: usize, metric: KangMetric, alpha: f64) -> f64 {
    let (bu, bv) = (pi[u], pi[v]);
    let mut delta = 0.0;
    for (j, &bj) in pi.iter().enumerate() {
        if j == u || j == v {
            continue;
        }
        delta += term(metric, alpha, mi_a[[u, j]] - mi_b[[bv, bj]]) - term(metric, alpha, mi_a[[u, j]] - mi_b[[bu, bj]]);
        delta += term(metric, alpha, mi_a[[v, j]] - mi_b[[bu, bj]]) - term(metric, alpha, mi_a[[v, j]] - mi_b[[bv, bj]]);
    }
    delta
}

/// Hill climbing over pairwise swaps with `max(1, iterations / 500)` random
/// restarts. Known `(A index, B index)` pairs are fixed throughout. Both
/// matrices must have the same size.
pub fn kang_match(mi_a: &Array2<f64>, mi_b: &Array2<f64>, known: &[(usize, usize)], cfg: &KangConfig) -> Result<KangAssignment> {
    cfg.validate()?;
    let p = mi_a.nrows();
    if mi_a.dim() != (p, p) || mi_b.dim() != (p, p) {
        return Err(Error::Shape(format!("MI matrices must be square and equal, got {:?} and {:?}", mi_a.dim(), mi_b.dim())));
    }
    let mut fixed_a = vec![None; p];
    let mut used_b = vec![false; p];
    for &(i, j) in known {
        if i >= p || j >= p {
            return Err(Error::invalid(format!("known pair ({i}, {j}) outside {p} features")));
        }
        if fixed_a[i].is_some() || used_b[j] {
            return Err(Error::Conflict(format!("known pair ({i}, {j}) reuses a feature")));
        }
        fixed_a[i] = Some(j);
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..p).filter(|&i| fixed_a[i].is_none()).collect();
    let free_b: Vec<usize> = (0..p).filter(|&j| !used_b[j]).collect();

    let restarts = (cfg.iterations / 500).max(1);
    let mut best: Option<KangAssignment> = None;
    for r in 0..restarts {
        let budget = cfg.iterations / restarts + usize::from(r < cfg.iterations % restarts);
        let mut rng = rng_for(cfg.seed, &[0x4A46, r as u64]);
        let result = climb(mi_a, mi_b, &fixed_a, &free_a, &free_b, budget, cfg, &mut rng);
        if best.as_ref().is_none_or(|b| result.objective > b.objective) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[allow(clippy::too_many_arguments)]
fn climb(
    mi_a: &Array2<f64>,
    mi_b: &Array2<f64>,
    fixed_a: &[Option<usize>],
    free_a: &[usize],
    free_b: &[usize],
    budget: usize,
    cfg: &KangConfig,
    rng: &mut Rng,
) -> KangAssignment {
    let mut shuffled = free_b.to_vec();
    shuffled.shuffle(rng);
    let mut pi: Vec<usize> = fixed_a.iter().map(|f| f.unwrap_or(usize::MAX)).collect();
    for (&i, &j) in free_a.iter().zip(&shuffled) {
        pi[i] = j;
    }
    let mut objective = kang_objective(mi_a, mi_b, &pi, cfg.metric, cfg.alpha);
    if free_a.len() >= 2 {
        for _ in 1..budget {
            let x = rng.random_range(0..free_a.len());
            let mut y = rng.random_range(0..free_a.len() - 1);
            if y >= x {
                y += 1;
            }
            let (u, v) = (free_a[x], free_a[y]);
            let d = swap_delta(mi_a, mi_b, &pi, u, v, cfg.metric, cfg.alpha);
            if d > 0.0 {
                pi.swap(u, v);
                objective += d;
            }
        }
    }
    // re-evaluate to shed accumulated rounding
    let objective = if budget > 1 { kang_objective(mi_a, mi_b, &pi, cfg.metric, cfg.alpha) } else { objective };
    KangAssignment { assignment: pi, objective }
}

/// Appends `count` knock-off columns: copies of randomly chosen real columns,
/// each with its rows independently shuffled. Names are `knockoff{i}`; the
/// mapped prefix is kept.
pub fn pad_with_knockoffs(ds: &Dataset, count: usize, rng: &mut Rng) -> Result<Dataset> {
    if count == 0 {
        return Ok(ds.clone());
    }
    let p = ds.n_features();
    if p == 0 {
        return Err(Error::invalid("cannot draw knock-offs from an empty dataset"));
    }
    let n = ds.n_rows();
    let mut values = Array2::zeros((n, p + count));
    values.slice_mut(ndarray::s![.., ..p]).assign(&ds.values());
    let mut features = ds.features().to_vec();
    for c in 0..count {
        let src = rng.random_range(0..p);
        let mut col = ds.column(src).to_vec();
        col.shuffle(rng);
        values.column_mut(p + c).assign(&ndarray::Array1::from(col));
        let mut meta = FeatureMeta::new(format!("knockoff{c}"), ds.features()[src].kind.clone());
        meta.origin = crate::dataset::Origin::Encoded;
        features.push(meta);
    }
    Dataset::new(ds.name(), values, features)?.with_mapped_count(ds.mapped_count())
}

/// Full baseline on two datasets sharing a mapped prefix. The narrower one
/// is padded with knock-offs, mapped columns are held fixed, and one
/// proposal is returned per unmapped real-to-real pair. The similarity of a
/// proposal is the mean objective term of its A feature; every proposal is
/// accepted.
pub fn kang_datasets(a: &Dataset, b: &Dataset, cfg: &KangConfig) -> Result<Vec<MatchProposal>> {
    let k = a.mapped_count();
    if b.mapped_count() != k {
        return Err(Error::invalid(format!("mapped counts differ: A has {k}, B has {}", b.mapped_count())));
    }
    let (pa, pb) = (a.n_features(), b.n_features());
    let mut rng = rng_for(cfg.seed, &[0x4B0F]);
    let a_pad = pad_with_knockoffs(a, pb.saturating_sub(pa), &mut rng)?;
    let b_pad = pad_with_knockoffs(b, pa.saturating_sub(pb), &mut rng)?;
    let mi_a = mi_matrix(&a_pad, cfg.bins)?;
    let mi_b = mi_matrix(&b_pad, cfg.bins)?;
    let known: Vec<(usize, usize)> = (0..k).map(|i| (i, i)).collect();
    let result = kang_match(&mi_a, &mi_b, &known, cfg)?;
    let p = result.assignment.len();
    let mut out = Vec::new();
    for i in k..pa {
        let j = result.assignment[i];
        if j >= pb {
            continue;
        }
        let contrib: f64 = (0..p)
            .filter(|&o| o != i)
            .map(|o| term(cfg.metric, cfg.alpha, mi_a[[i, o]] - mi_b[[j, result.assignment[o]]]))
            .sum::<f64>()
            / (p - 1) as f64;
        out.push(MatchProposal::new(a.features()[i].name.clone(), b.features()[j].name.clone(), contrib));
    }
    Ok(out)
}
