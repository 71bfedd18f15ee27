//! Tabular data model and pre-processing.
//!
//! A [`Dataset`] is a dense row-major matrix with one [`FeatureMeta`] per
//! column. The first `mapped_count` columns are the known-mapped features and
//! appear in the same order in both databases being matched.
//!
//! Raw input arrives as a [`RawTable`] (possibly with missing cells and
//! categorical columns). The usual path is
//! [`impute_simple`] → [`one_hot_encode`] → [`standardize`] or [`unit_norm`]
//! → [`reorder_mapped_first`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Continuous,
    Binary,
    /// One indicator column of an expanded categorical variable.
    OneHot { parent: String, level: String },
}

impl FeatureKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, FeatureKind::Continuous)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Raw,
    Encoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub origin: Origin,
    /// Weight of this column in the cross-reconstruction loss. Only read for
    /// known-mapped columns.
    pub certainty_weight: f64,
    /// Rows whose value was filled in by [`impute_simple`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub imputed_rows: Vec<usize>,
}

impl FeatureMeta {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            origin: Origin::Raw,
            certainty_weight: 1.0,
            imputed_rows: Vec::new(),
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Continuous)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Binary)
    }
}

/// Non-fatal conditions found while pre-processing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// A categorical column with a single level expanded to a constant column.
    ConstantColumn(String),
    /// A continuous column with zero norm or zero variance was left unchanged.
    ZeroScale(String),
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ConstantColumn(c) => write!(f, "column `{c}` is constant"),
            Warning::ZeroScale(c) => write!(f, "column `{c}` has zero scale; left unchanged"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    values: Array2<f64>,
    features: Vec<FeatureMeta>,
    mapped_count: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, values: Array2<f64>, features: Vec<FeatureMeta>) -> Result<Self> {
        if values.ncols() != features.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} feature descriptors",
                values.ncols(),
                features.len()
            )));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
            if !(f.certainty_weight.is_finite() && f.certainty_weight >= 0.0) {
                return Err(Error::invalid(format!("certainty weight of `{}` must be finite and >= 0", f.name)));
            }
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("dataset values contain NaN"));
        }
        Ok(Self { name: name.into(), values, features, mapped_count: 0 })
    }

    /// Builds a dataset from named columns, tagging columns whose values are
    /// all 0/1 as binary and everything else as continuous.
    pub fn from_columns(name: impl Into<String>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        let mut values = Array2::zeros((n, columns.len()));
        let mut features = Vec::with_capacity(columns.len());
        for (j, (cname, col)) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::LengthMismatch { left: n, right: col.len() });
            }
            let kind = if is_binary(col.iter().copied()) { FeatureKind::Binary } else { FeatureKind::Continuous };
            values.column_mut(j).assign(&ArrayView1::from(&col));
            features.push(FeatureMeta::new(cname, kind));
        }
        Self::new(name, values, features)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.features
    }

    pub fn mapped_count(&self) -> usize {
        self.mapped_count
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_unmapped(&self) -> usize {
        self.n_features() - self.mapped_count
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn column_by_name(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        self.index_of(name)
            .map(|j| self.column(j))
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn mapped_names(&self) -> Vec<String> {
        self.features[..self.mapped_count].iter().map(|f| f.name.clone()).collect()
    }

    pub fn unmapped_names(&self) -> Vec<String> {
        self.features[self.mapped_count..].iter().map(|f| f.name.clone()).collect()
    }

    /// Certainty weights of the known-mapped prefix.
    pub fn mapped_weights(&self) -> Vec<f64> {
        self.features[..self.mapped_count].iter().map(|f| f.certainty_weight).collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Marks the first `k` columns as known-mapped. Does not move columns; see
    /// [`reorder_mapped_first`] for that.
    pub fn with_mapped_count(mut self, k: usize) -> Result<Self> {
        if k > self.n_features() {
            return Err(Error::invalid(format!("mapped count {k} exceeds {} features", self.n_features())));
        }
        if let Some(f) = self.features[..k].iter().find(|f| f.certainty_weight <= 0.0) {
            return Err(Error::invalid(format!("mapped feature `{}` has non-positive certainty weight", f.name)));
        }
        self.mapped_count = k;
        Ok(self)
    }

    pub fn with_certainty_weights<S: AsRef<str>>(mut self, weights: &[(S, f64)]) -> Result<Self> {
        for (name, w) in weights {
            let j = self.index_of(name.as_ref()).ok_or_else(|| Error::UnknownFeature(name.as_ref().to_string()))?;
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::invalid(format!("certainty weight for `{}` must be positive", name.as_ref())));
            }
            self.features[j].certainty_weight = *w;
        }
        Ok(self)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            values: self.values.select(Axis(0), rows),
            features: self.features.clone(),
            mapped_count: self.mapped_count,
        }
    }

    /// Column subset in the given order. The mapped prefix is reset to zero.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            values: self.values.select(Axis(1), cols),
            features: cols.iter().map(|&j| self.features[j].clone()).collect(),
            mapped_count: 0,
        }
    }

    /// Replaces column values in place of `j`, keeping metadata.
    pub(crate) fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        self.values.column_mut(j).mapv_inplace(f);
    }

    pub(crate) fn set_feature(&mut self, j: usize, meta: FeatureMeta) {
        self.features[j] = meta;
    }

    pub fn into_parts(self) -> (String, Array2<f64>, Vec<FeatureMeta>, usize) {
        (self.name, self.values, self.features, self.mapped_count)
    }
}

pub(crate) fn is_binary(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(|v| v == 0.0 || v == 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawCells {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl RawCells {
    fn len(&self) -> usize {
        match self {
            RawCells::Numeric(v) => v.len(),
            RawCells::Categorical(v) => v.len(),
        }
    }

    fn missing_rows(&self) -> Vec<usize> {
        match self {
            RawCells::Numeric(v) => v.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i).collect(),
            RawCells::Categorical(v) => v.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub cells: RawCells,
    pub imputed_rows: Vec<usize>,
}

impl RawColumn {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self { name: name.into(), cells: RawCells::Numeric(values), imputed_rows: Vec::new() }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: Vec<Option<S>>) -> Self {
        let cells = values.into_iter().map(|v| v.map(Into::into)).collect();
        Self { name: name.into(), cells: RawCells::Categorical(cells), imputed_rows: Vec::new() }
    }
}

/// Untyped input table as read from disk. `None` cells are missing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub name: String,
    pub columns: Vec<RawColumn>,
}

impl RawTable {
    pub fn new(name: impl Into<String>, columns: Vec<RawColumn>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.cells.len());
        if let Some(c) = columns.iter().find(|c| c.cells.len() != n) {
            return Err(Error::LengthMismatch { left: n, right: c.cells.len() });
        }
        Ok(Self { name: name.into(), columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.cells.len())
    }
}

/// Fills missing cells: mean for continuous columns, mode for binary and
/// categorical ones (ties go to the smallest value). The filled rows are
/// remembered on the column.
pub fn impute_simple(table: &RawTable) -> Result<RawTable> {
    let mut out = table.clone();
    for col in &mut out.columns {
        let missing = col.cells.missing_rows();
        if missing.is_empty() {
            continue;
        }
        if missing.len() == col.cells.len() {
            return Err(Error::FullyMissing(col.name.clone()));
        }
        match &mut col.cells {
            RawCells::Numeric(values) => {
                let observed: Vec<f64> = values.iter().flatten().copied().collect();
                let fill = if is_binary(observed.iter().copied()) {
                    let ones = observed.iter().filter(|&&v| v == 1.0).count();
                    if 2 * ones > observed.len() { 1.0 } else { 0.0 }
                } else {
                    observed.iter().sum::<f64>() / observed.len() as f64
                };
                values.iter_mut().filter(|v| v.is_none()).for_each(|v| *v = Some(fill));
            }
            RawCells::Categorical(values) => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for v in values.iter().flatten() {
                    *counts.entry(v.as_str()).or_default() += 1;
                }
                // BTreeMap iterates in sorted order, so max_by_key keeps the
                // last maximum; reverse to prefer the smallest level.
                let fill = counts
                    .iter()
                    .rev()
                    .max_by_key(|(_, &c)| c)
                    .map(|(l, _)| l.to_string())
                    .expect("column has observed values");
                values.iter_mut().filter(|v| v.is_none()).for_each(|v| *v = Some(fill.clone()));
            }
        }
        col.imputed_rows = missing;
    }
    Ok(out)
}

/// Expands categorical columns into one indicator column per level (levels
/// sorted lexicographically, named `parent_level`). Numeric columns pass
/// through, tagged binary when all values are 0/1.
pub fn one_hot_encode(table: &RawTable) -> Result<(Dataset, Vec<Warning>)> {
    let n = table.n_rows();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut features = Vec::new();
    let mut warnings = Vec::new();
    for col in &table.columns {
        match &col.cells {
            RawCells::Numeric(values) => {
                let vals: Vec<f64> = values
                    .iter()
                    .map(|v| v.ok_or_else(|| Error::invalid(format!("column `{}` still has missing cells", col.name))))
                    .collect::<Result<_>>()?;
                let kind = if is_binary(vals.iter().copied()) { FeatureKind::Binary } else { FeatureKind::Continuous };
                let mut meta = FeatureMeta::new(col.name.clone(), kind);
                meta.imputed_rows = col.imputed_rows.clone();
                columns.push(vals);
                features.push(meta);
            }
            RawCells::Categorical(values) => {
                let cells: Vec<&str> = values
                    .iter()
                    .map(|v| {
                        v.as_deref()
                            .ok_or_else(|| Error::invalid(format!("column `{}` still has missing cells", col.name)))
                    })
                    .collect::<Result<_>>()?;
                let levels: BTreeSet<&str> = cells.iter().copied().collect();
                if levels.len() == 1 {
                    let w = Warning::ConstantColumn(col.name.clone());
                    log::warn!("{w}");
                    warnings.push(w);
                }
                for level in levels {
                    columns.push(cells.iter().map(|&c| if c == level { 1.0 } else { 0.0 }).collect());
                    let mut meta = FeatureMeta::new(
                        format!("{}_{}", col.name, level),
                        FeatureKind::OneHot { parent: col.name.clone(), level: level.to_string() },
                    );
                    meta.origin = Origin::Encoded;
                    meta.imputed_rows = col.imputed_rows.clone();
                    features.push(meta);
                }
            }
        }
    }
    let mut values = Array2::zeros((n, columns.len()));
    for (j, c) in columns.iter().enumerate() {
        values.column_mut(j).assign(&ArrayView1::from(c));
    }
    Ok((Dataset::new(table.name.clone(), values, features)?, warnings))
}

/// Scales every continuous column to unit Euclidean norm over rows. Binary
/// and one-hot columns are left alone, as are all-zero columns (with a
/// warning).
pub fn unit_norm(ds: &Dataset) -> (Dataset, Vec<Warning>) {
    let mut out = ds.clone();
    let mut warnings = Vec::new();
    for j in 0..ds.n_features() {
        if !ds.features[j].kind.is_continuous() {
            continue;
        }
        let norm = ds.column(j).dot(&ds.column(j)).sqrt();
        if norm > 0.0 {
            out.map_column(j, |v| v / norm);
        } else {
            let w = Warning::ZeroScale(ds.features[j].name.clone());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    (out, warnings)
}

/// Centers every continuous column and scales it to unit sample standard
/// deviation. Zero-variance columns are only centered (with a warning).
pub fn standardize(ds: &Dataset) -> (Dataset, Vec<Warning>) {
    let mut out = ds.clone();
    let mut warnings = Vec::new();
    let n = ds.n_rows() as f64;
    for j in 0..ds.n_features() {
        if !ds.features[j].kind.is_continuous() || ds.n_rows() < 2 {
            continue;
        }
        let col = ds.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd > 0.0 {
            out.map_column(j, |v| (v - mean) / sd);
        } else {
            out.map_column(j, |v| v - mean);
            let w = Warning::ZeroScale(ds.features[j].name.clone());
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    (out, warnings)
}

/// Moves the named columns to the front in the given order; the remaining
/// columns keep their relative order. Sets `mapped_count` to `mapped.len()`.
pub fn reorder_mapped_first<S: AsRef<str>>(ds: &Dataset, mapped: &[S]) -> Result<Dataset> {
    let mut order = Vec::with_capacity(ds.n_features());
    let mut taken = vec![false; ds.n_features()];
    for name in mapped {
        let j = ds.index_of(name.as_ref()).ok_or_else(|| Error::UnknownFeature(name.as_ref().to_string()))?;
        if taken[j] {
            return Err(Error::DuplicateFeature(name.as_ref().to_string()));
        }
        taken[j] = true;
        order.push(j);
    }
    order.extend((0..ds.n_features()).filter(|&j| !taken[j]));
    ds.select_columns(&order).with_mapped_count(mapped.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cont(name: &str, v: Vec<f64>) -> Dataset {
        Dataset::new("t", Array2::from_shape_vec((v.len(), 1), v).unwrap(), vec![FeatureMeta::continuous(name)]).unwrap()
    }

    #[test]
    fn one_hot_two_levels() {
        let t = RawTable::new("t", vec![RawColumn::categorical("c", vec![Some("a"), Some("b"), Some("a")])]).unwrap();
        let (ds, w) = one_hot_encode(&t).unwrap();
        assert!(w.is_empty());
        assert_eq!(ds.feature_names(), vec!["c_a", "c_b"]);
        assert_eq!(ds.column(0).to_vec(), vec![1.0, 0.0, 1.0]);
        assert_eq!(ds.column(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.features()[1].kind, FeatureKind::OneHot { parent: "c".into(), level: "b".into() });
    }

    #[test]
    fn one_hot_single_level_warns() {
        let t = RawTable::new("t", vec![RawColumn::categorical("c", vec![Some("x"); 3])]).unwrap();
        let (ds, w) = one_hot_encode(&t).unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.column(0).to_vec(), vec![1.0; 3]);
        assert_eq!(w, vec![Warning::ConstantColumn("c".into())]);
    }

    #[test]
    fn one_hot_levels_sorted() {
        let t = RawTable::new("t", vec![RawColumn::categorical("c", vec![Some("z"), Some("b"), Some("m")])]).unwrap();
        let (ds, _) = one_hot_encode(&t).unwrap();
        assert_eq!(ds.feature_names(), vec!["c_b", "c_m", "c_z"]);
    }

    #[test]
    fn actfast_shape_encodes_to_81_columns() {
        // 31 binary features plus 9 categorical ones whose level counts sum to 50.
        let n = 60;
        let mut cols = Vec::new();
        for b in 0..31 {
            cols.push(RawColumn::numeric(format!("bin{b}"), (0..n).map(|i| Some(((i + b) % 2) as f64)).collect()));
        }
        for (c, levels) in [4usize, 5, 6, 7, 8, 5, 5, 5, 5].iter().enumerate() {
            let cells = (0..n).map(|i| Some(format!("L{}", i % levels))).collect();
            cols.push(RawColumn::categorical(format!("cat{c}"), cells));
        }
        let (ds, _) = one_hot_encode(&RawTable::new("actfast", cols).unwrap()).unwrap();
        assert_eq!(ds.n_features(), 81);
        assert_eq!(ds.n_rows(), n);
    }

    #[test]
    fn unit_norm_three_four_five() {
        let (ds, w) = unit_norm(&cont("x", vec![3.0, 4.0]));
        assert!(w.is_empty());
        assert!((ds.column(0)[0] - 0.6).abs() < 1e-15);
        assert!((ds.column(0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unit_norm_zero_column_warns() {
        let (ds, w) = unit_norm(&cont("x", vec![0.0; 3]));
        assert_eq!(ds.column(0).to_vec(), vec![0.0; 3]);
        assert_eq!(w, vec![Warning::ZeroScale("x".into())]);
    }

    #[test]
    fn unit_norm_skips_binary() {
        let ds = Dataset::from_columns("t", vec![("b".into(), vec![0.0, 1.0, 1.0])]).unwrap();
        let (out, _) = unit_norm(&ds);
        assert_eq!(out.column(0).to_vec(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn standardize_moments() {
        let (ds, _) = standardize(&cont("x", vec![1.0, 2.0, 3.0, 4.0, 10.0]));
        let c = ds.column(0);
        assert!(c.sum().abs() < 1e-12);
        assert!((c.dot(&c) / 4.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impute_mean_and_mode() {
        let t = RawTable::new(
            "t",
            vec![
                RawColumn::numeric("c", vec![Some(1.0), None, Some(3.0)]),
                RawColumn::numeric("b", vec![Some(0.0), Some(1.0), Some(1.0)]),
            ],
        )
        .unwrap();
        let out = impute_simple(&t).unwrap();
        assert_eq!(out.columns[0].cells, RawCells::Numeric(vec![Some(1.0), Some(2.0), Some(3.0)]));
        assert_eq!(out.columns[0].imputed_rows, vec![1]);

        let t = RawTable::new("t", vec![RawColumn::numeric("b", vec![Some(0.0), Some(1.0), Some(1.0), None])]).unwrap();
        let out = impute_simple(&t).unwrap();
        assert_eq!(out.columns[0].cells, RawCells::Numeric(vec![Some(0.0), Some(1.0), Some(1.0), Some(1.0)]));
        let (ds, _) = one_hot_encode(&out).unwrap();
        assert_eq!(ds.features()[0].kind, FeatureKind::Binary);
        assert_eq!(ds.features()[0].imputed_rows, vec![3]);
    }

    #[test]
    fn impute_categorical_mode() {
        let t = RawTable::new("t", vec![RawColumn::categorical("c", vec![Some("b"), Some("a"), None, Some("b")])]).unwrap();
        let out = impute_simple(&t).unwrap();
        assert_eq!(out.columns[0].cells, RawCells::Categorical(vec![Some("b".into()), Some("a".into()), Some("b".into()), Some("b".into())]));
    }

    #[test]
    fn impute_fully_missing_errors() {
        let t = RawTable::new("t", vec![RawColumn::numeric("gone", vec![None, None])]).unwrap();
        match impute_simple(&t) {
            Err(Error::FullyMissing(c)) => assert_eq!(c, "gone"),
            other => panic!("expected FullyMissing, got {other:?}"),
        }
    }

    #[test]
    fn encode_rejects_missing() {
        let t = RawTable::new("t", vec![RawColumn::numeric("c", vec![Some(1.0), None])]).unwrap();
        assert!(one_hot_encode(&t).is_err());
    }

    fn abc() -> Dataset {
        Dataset::from_columns(
            "t",
            vec![("c".into(), vec![1.0, 2.0]), ("a".into(), vec![3.0, 4.0]), ("b".into(), vec![5.0, 6.0])],
        )
        .unwrap()
    }

    #[test]
    fn reorder_moves_mapped_to_front() {
        let ds = reorder_mapped_first(&abc(), &["b"]).unwrap();
        assert_eq!(ds.feature_names(), vec!["b", "c", "a"]);
        assert_eq!(ds.mapped_count(), 1);
        assert_eq!(ds.values(), array![[5.0, 1.0, 3.0], [6.0, 2.0, 4.0]]);
    }

    #[test]
    fn reorder_all_mapped() {
        let ds = reorder_mapped_first(&abc(), &["a", "b", "c"]).unwrap();
        assert_eq!(ds.mapped_count(), 3);
        assert_eq!(ds.feature_names(), vec!["a", "b", "c"]);
    }

    #[test]
    fn reorder_unknown_errors() {
        assert!(matches!(reorder_mapped_first(&abc(), &["z"]), Err(Error::UnknownFeature(_))));
        assert!(matches!(reorder_mapped_first(&abc(), &["a", "a"]), Err(Error::DuplicateFeature(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = Dataset::from_columns("t", vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]);
        assert!(matches!(r, Err(Error::DuplicateFeature(_))));
    }

    #[test]
    fn certainty_weights() {
        let ds = abc().with_certainty_weights(&[("a", 2.5)]).unwrap();
        let ds = reorder_mapped_first(&ds, &["a", "b"]).unwrap();
        assert_eq!(ds.mapped_weights(), vec![2.5, 1.0]);
        assert!(abc().with_certainty_weights(&[("a", 0.0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reorder_is_idempotent(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), k in 0usize..=6) {
                let cols = (0..6).map(|j| (format!("f{j}"), vec![j as f64, 1.0 + j as f64])).collect();
                let ds = Dataset::from_columns("t", cols).unwrap();
                let mapped: Vec<String> = perm[..k].iter().map(|j| format!("f{j}")).collect();
                let once = reorder_mapped_first(&ds, &mapped).unwrap();
                let twice = reorder_mapped_first(&once, &mapped).unwrap();
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn unit_norm_scale_invariant(col in prop::collection::vec(-100.0f64..100.0, 2..40), alpha in 0.01f64..1000.0) {
                prop_assume!(col.iter().any(|v| v.abs() > 1e-3));
                let (a, _) = unit_norm(&cont("x", col.clone()));
                let (b, _) = unit_norm(&cont("x", col.iter().map(|v| v * alpha).collect()));
                for (x, y) in a.column(0).iter().zip(b.column(0).iter()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                prop_assert!((a.column(0).dot(&a.column(0)) - 1.0).abs() < 1e-12);
            }

            #[test]
            fn one_hot_rows_sum_to_one(cells in prop::collection::vec(0u8..5, 1..50)) {
                let t = RawTable::new("t", vec![RawColumn::categorical("c", cells.iter().map(|c| Some(format!("l{c}"))).collect())]).unwrap();
                let (ds, _) = one_hot_encode(&t).unwrap();
                prop_assert_eq!(ds.n_rows(), cells.len());
                for row in ds.values().rows() {
                    prop_assert_eq!(row.sum(), 1.0);
                }
            }
        }
    }
}
