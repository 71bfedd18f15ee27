//! Synthetic benchmark data: factor-model covariances, Gaussian and
//! two-cluster mixture samples, and matching scenarios built from a pair of
//! independent samples (permutation, onto and partial maps, squared columns).

use std::collections::HashSet;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, FeatureMeta};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub dim: usize,
    pub factor_dim: usize,
    pub seed: u64,
}

/// `W Wᵀ + D` with `W` an `dim × factor_dim` matrix of standard normals and
/// `D` diagonal with integer entries drawn uniformly from `1..=20`.
pub fn make_covariance(spec: &CovarianceSpec) -> Result<Array2<f64>> {
    let CovarianceSpec { dim, factor_dim, seed } = *spec;
    if dim == 0 || factor_dim == 0 || factor_dim > dim {
        return Err(Error::invalid(format!("need 1 <= factor_dim <= dim, got factor_dim={factor_dim}, dim={dim}")));
    }
    let mut rng = rng_for(seed, &[0xC0FA]);
    let w = Array2::from_shape_simple_fn((dim, factor_dim), || rng.sample::<f64, _>(StandardNormal));
    let mut cov = w.dot(&w.t());
    for i in 0..dim {
        cov[[i, i]] += rng.random_range(1..=20) as f64;
    }
    // exact symmetry
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    Ok(cov)
}

/// Lower Cholesky factor.
pub fn cholesky(cov: &Array2<f64>) -> Result<Array2<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Shape(format!("covariance must be square, got {:?}", cov.dim())));
    }
    let m = DMatrix::from_fn(n, n, |i, j| cov[[i, j]]);
    let l = m.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| l[(i, j)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorFamily {
    Gaussian,
    TwoClusterGaussian,
    BinarizedTwoCluster,
    IndependentGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: GeneratorFamily,
    pub dim: usize,
    pub n_samples: usize,
    pub mean_low: f64,
    pub mean_high: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: GeneratorFamily, dim: usize, n_samples: usize, seed: u64) -> Self {
        Self { family, dim, n_samples, mean_low: 10.0, mean_high: 20.0, seed }
    }
}

/// A fully parameterized distribution. Both databases of a scenario draw
/// from the same population, so mixture means are fixed here, once.
#[derive(Clone, Debug)]
pub struct Population {
    family: GeneratorFamily,
    chol: Array2<f64>,
    means: Option<[Array1<f64>; 2]>,
}

impl Population {
    /// `cov` is ignored for [`GeneratorFamily::IndependentGaussian`] except
    /// for its dimension.
    pub fn new(family: GeneratorFamily, cov: &Array2<f64>, mean_range: (f64, f64), seed: u64) -> Result<Self> {
        let dim = cov.nrows();
        let chol = match family {
            GeneratorFamily::IndependentGaussian => Array2::eye(dim),
            _ => cholesky(cov)?,
        };
        let means = match family {
            GeneratorFamily::TwoClusterGaussian | GeneratorFamily::BinarizedTwoCluster => {
                let (lo, hi) = mean_range;
                if lo.is_nan() || hi.is_nan() || lo >= hi {
                    return Err(Error::invalid(format!("empty mean range [{lo}, {hi}]")));
                }
                let mut rng = rng_for(seed, &[0x3EA5]);
                let mut draw = || Array1::from_shape_simple_fn(dim, || rng.random_range(lo..hi));
                Some([draw(), draw()])
            }
            _ => None,
        };
        Ok(Self { family, chol, means })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn cluster_means(&self) -> Option<&[Array1<f64>; 2]> {
        self.means.as_ref()
    }

    /// Draws `n` rows. Columns are named `x0, x1, ...`.
    pub fn sample(&self, n: usize, name: &str, rng: &mut Rng) -> Result<Dataset> {
        Ok(self.sample_with_labels(n, name, rng)?.0)
    }

    /// Like [`Population::sample`] but also returns the mixture component of
    /// each row (all zero for single-component families).
    pub fn sample_with_labels(&self, n: usize, name: &str, rng: &mut Rng) -> Result<(Dataset, Vec<usize>)> {
        if n < 2 {
            return Err(Error::TooFewObservations { needed: 2, got: n });
        }
        let dim = self.dim();
        let eps = Array2::from_shape_simple_fn((n, dim), || rng.sample::<f64, _>(StandardNormal));
        let mut x = eps.dot(&self.chol.t());
        let mut labels = vec![0usize; n];
        if let Some(means) = &self.means {
            for (i, mut row) in x.rows_mut().into_iter().enumerate() {
                let c = usize::from(rng.random_bool(0.5));
                labels[i] = c;
                row += &means[c];
            }
        }
        let binarize = self.family == GeneratorFamily::BinarizedTwoCluster;
        if binarize {
            for mut col in x.columns_mut() {
                let nf = n as f64;
                let mean = col.sum() / nf;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
                col.mapv_inplace(|v| if (v - mean) / sd > 0.0 { 1.0 } else { 0.0 });
            }
        }
        let kind = if binarize { FeatureKind::Binary } else { FeatureKind::Continuous };
        let features = (0..dim).map(|j| FeatureMeta::new(format!("x{j}"), kind.clone())).collect();
        Ok((Dataset::new(name, x, features)?, labels))
    }
}

/// One-shot draw from `spec` with covariance `cov`.
pub fn sample(spec: &GeneratorSpec, cov: &Array2<f64>) -> Result<Dataset> {
    if cov.nrows() != spec.dim || cov.ncols() != spec.dim {
        return Err(Error::Shape(format!("covariance is {:?}, generator dim is {}", cov.dim(), spec.dim)));
    }
    let pop = Population::new(spec.family, cov, (spec.mean_low, spec.mean_high), spec.seed)?;
    let mut rng = rng_for(spec.seed, &[0x5A3F]);
    pop.sample(spec.n_samples, "sample", &mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Both databases hold the same features.
    Permutation,
    /// A's features are a proper subset of B's.
    Onto,
    /// Each database has features the other lacks.
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Standardize, then square.
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub map_kind: MapKind,
    pub k_mapped: usize,
    /// Columns removed from A only.
    pub drop_a: usize,
    /// Columns removed from B only.
    pub drop_b: usize,
    /// Unmapped shared columns of B to square.
    pub transform_count: usize,
}

impl ScenarioConfig {
    pub fn permutation(k_mapped: usize) -> Self {
        Self { map_kind: MapKind::Permutation, k_mapped, drop_a: 0, drop_b: 0, transform_count: 0 }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self.map_kind {
            MapKind::Permutation => self.drop_a == 0 && self.drop_b == 0,
            MapKind::Onto => self.drop_a > 0 && self.drop_b == 0,
            MapKind::Partial => self.drop_a > 0 && self.drop_b > 0,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "drop counts (a={}, b={}) inconsistent with {:?} map",
                self.drop_a, self.drop_b, self.map_kind
            )));
        }
        let used = self.k_mapped + self.drop_a + self.drop_b + self.transform_count;
        if used > dim || self.k_mapped + self.drop_a + self.drop_b > dim {
            return Err(Error::invalid(format!(
                "{} mapped + {} dropped + {} transformed columns exceed {dim} features",
                self.k_mapped,
                self.drop_a + self.drop_b,
                self.transform_count
            )));
        }
        Ok(())
    }
}

/// Ground truth of a matching experiment. Written next to the data as the
/// scenario manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub map_kind: MapKind,
    /// Known-mapped features (same name in both databases), in mapped order.
    pub mapped: Vec<String>,
    /// Correct `(feature of A, feature of B)` pairs among unmapped features.
    pub gold_map: Vec<(String, String)>,
    /// Transformed B features and the transform applied.
    pub transformed_features: Vec<(String, Transform)>,
    /// Source columns dropped from A and from B.
    pub dropped_a: Vec<String>,
    pub dropped_b: Vec<String>,
    pub features_a: Vec<String>,
    pub features_b: Vec<String>,
    pub seed: u64,
    pub trial: u64,
    pub permutation: u64,
}

impl ScenarioSpec {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Two datasets ready for matching plus everything needed to score them.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub a: Dataset,
    pub b: Dataset,
    pub spec: ScenarioSpec,
    /// Columns dropped from A, row-aligned with `a`, under their source names.
    pub withheld_a: Dataset,
    /// Untransformed values of B's transformed columns, row-aligned with `b`,
    /// under B's names.
    pub pretransform_b: Dataset,
    /// Source column name of every column of `b`.
    pub b_sources: Vec<String>,
}

/// Builds a matching scenario from two independent samples with identical
/// columns.
///
/// Mapped features are drawn with a stream keyed by `trial`; dropped,
/// transformed and permuted columns by `(trial, permutation)`. A keeps the
/// source names; B's unmapped columns are shuffled and renamed `b0, b1, ...`
/// so names carry no information.
pub fn build_scenario(
    a: &Dataset,
    b: &Dataset,
    cfg: &ScenarioConfig,
    seed: u64,
    trial: u64,
    permutation: u64,
) -> Result<Scenario> {
    let names = a.feature_names();
    if names != b.feature_names() {
        return Err(Error::invalid("scenario inputs must share column names"));
    }
    let dim = names.len();
    cfg.validate(dim)?;

    let mut trial_rng = rng_for(seed, &[0x5CE0, trial]);
    let mut cols: Vec<usize> = (0..dim).collect();
    cols.shuffle(&mut trial_rng);
    let mapped: Vec<usize> = cols[..cfg.k_mapped].to_vec();

    let mut perm_rng = rng_for(seed, &[0x5CE1, trial, permutation]);
    let mut rest: Vec<usize> = cols[cfg.k_mapped..].to_vec();
    rest.sort_unstable();
    rest.shuffle(&mut perm_rng);
    let dropped_a: Vec<usize> = rest[..cfg.drop_a].to_vec();
    let dropped_b: Vec<usize> = rest[cfg.drop_a..cfg.drop_a + cfg.drop_b].to_vec();
    let shared_unmapped: Vec<usize> = rest[cfg.drop_a + cfg.drop_b..].to_vec();
    let transformed: HashSet<usize> = shared_unmapped[..cfg.transform_count].iter().copied().collect();

    let mut a_unmapped: Vec<usize> = shared_unmapped.iter().chain(&dropped_b).copied().collect();
    a_unmapped.sort_unstable();
    let mut b_unmapped: Vec<usize> = shared_unmapped.iter().chain(&dropped_a).copied().collect();
    b_unmapped.sort_unstable();
    b_unmapped.shuffle(&mut perm_rng);

    let a_cols: Vec<usize> = mapped.iter().chain(&a_unmapped).copied().collect();
    let b_cols: Vec<usize> = mapped.iter().chain(&b_unmapped).copied().collect();
    let a_out = a.select_columns(&a_cols).with_name("A").with_mapped_count(cfg.k_mapped)?;
    let mut b_out = b.select_columns(&b_cols).with_name("B");

    let mut b_sources = Vec::with_capacity(b_cols.len());
    let mut pre_cols = Vec::new();
    let mut transformed_features = Vec::new();
    for (pos, &src) in b_cols.iter().enumerate() {
        b_sources.push(names[src].clone());
        if pos < cfg.k_mapped {
            continue;
        }
        let new_name = format!("b{}", pos - cfg.k_mapped);
        let mut meta = b_out.features()[pos].clone();
        meta.name = new_name.clone();
        if transformed.contains(&src) {
            let col = b_out.column(pos).to_owned();
            pre_cols.push((new_name.clone(), col.to_vec()));
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt().max(f64::MIN_POSITIVE);
            b_out.map_column(pos, |v| ((v - mean) / sd).powi(2));
            meta.kind = FeatureKind::Continuous;
            transformed_features.push((new_name, Transform::Square));
        }
        b_out.set_feature(pos, meta);
    }
    let b_out = b_out.with_mapped_count(cfg.k_mapped)?;

    let b_name_of = |src: usize| -> String {
        let pos = b_cols.iter().position(|&c| c == src).expect("present in B");
        b_out.features()[pos].name.clone()
    };
    let mut gold_map: Vec<(String, String)> =
        shared_unmapped.iter().map(|&src| (names[src].clone(), b_name_of(src))).collect();
    gold_map.sort();

    let withheld_a = a.select_columns(&dropped_a).with_name("A-withheld");
    let pretransform_b = Dataset::from_columns("B-pretransform", pre_cols)
        .or_else(|_| Dataset::new("B-pretransform", Array2::zeros((b.n_rows(), 0)), vec![]))?;
    let pretransform_b = if pretransform_b.n_rows() == b.n_rows() {
        pretransform_b
    } else {
        Dataset::new("B-pretransform", Array2::zeros((b.n_rows(), 0)), vec![])?
    };

    let spec = ScenarioSpec {
        map_kind: cfg.map_kind,
        mapped: mapped.iter().map(|&j| names[j].clone()).collect(),
        gold_map,
        transformed_features,
        dropped_a: dropped_a.iter().map(|&j| names[j].clone()).collect(),
        dropped_b: dropped_b.iter().map(|&j| names[j].clone()).collect(),
        features_a: a_out.feature_names(),
        features_b: b_out.feature_names(),
        seed,
        trial,
        permutation,
    };
    Ok(Scenario { a: a_out, b: b_out, spec, withheld_a, pretransform_b, b_sources })
}
