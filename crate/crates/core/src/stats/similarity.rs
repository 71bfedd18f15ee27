use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceMeasure {
    Pearson,
    Cosine,
    MutualInformation,
}

/// Dense affinities between the features of two datasets. Rows belong to
/// one dataset, columns to the other.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    pub row_label: String,
    pub row_ids: Vec<String>,
    pub col_label: String,
    pub col_ids: Vec<String>,
    pub values: Array2<f64>,
    pub degenerate: Array2<bool>,
    pub measure: DependenceMeasure,
}

impl SimilarityMatrix {
    pub fn new(
        row_label: impl Into<String>,
        row_ids: Vec<String>,
        col_label: impl Into<String>,
        col_ids: Vec<String>,
        values: Array2<f64>,
        degenerate: Option<Array2<bool>>,
        measure: DependenceMeasure,
    ) -> Result<Self> {
        if values.dim() != (row_ids.len(), col_ids.len()) {
            return Err(Error::Shape(format!(
                "similarity values are {:?} but ids are {}x{}",
                values.dim(),
                row_ids.len(),
                col_ids.len()
            )));
        }
        let degenerate = degenerate.unwrap_or_else(|| Array2::from_elem(values.dim(), false));
        if degenerate.dim() != values.dim() {
            return Err(Error::Shape("degenerate mask does not match values".into()));
        }
        let bounded = !matches!(measure, DependenceMeasure::MutualInformation);
        for &v in values.iter() {
            let ok = if bounded { v.abs() <= 1.0 + 1e-9 } else { v >= 0.0 };
            if !ok {
                return Err(Error::invalid(format!("similarity entry {v} out of range for {measure:?}")));
            }
        }
        Ok(Self {
            row_label: row_label.into(),
            row_ids,
            col_label: col_label.into(),
            col_ids,
            values,
            degenerate,
            measure,
        })
    }

    pub fn nrows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nrows() == 0 || self.ncols() == 0
    }

    pub fn transpose(&self) -> Self {
        Self {
            row_label: self.col_label.clone(),
            row_ids: self.col_ids.clone(),
            col_label: self.row_label.clone(),
            col_ids: self.row_ids.clone(),
            values: self.values.t().to_owned(),
            degenerate: self.degenerate.t().to_owned(),
            measure: self.measure,
        }
    }

    /// Restriction to the given row and column indices, in that order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let pick = |m: &Array2<f64>| Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| m[[rows[i], cols[j]]]);
        Self {
            row_label: self.row_label.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            col_label: self.col_label.clone(),
            col_ids: cols.iter().map(|&j| self.col_ids[j].clone()).collect(),
            values: pick(&self.values),
            degenerate: Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| self.degenerate[[rows[i], cols[j]]]),
            measure: self.measure,
        }
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    pub fn col_index(&self, id: &str) -> Option<usize> {
        self.col_ids.iter().position(|c| c == id)
    }

    /// Column index of the largest entry in each row (first on ties).
    pub fn row_argmax(&self) -> Vec<Option<usize>> {
        self.values
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(None, |best: Option<(usize, f64)>, (j, &v)| match best {
                        Some((_, bv)) if bv >= v => best,
                        _ => Some((j, v)),
                    })
                    .map(|(j, _)| j)
            })
            .collect()
    }

    /// CSV with the column ids in the header and the row id in the first field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![format!("{}\\{}", self.row_label, self.col_label)];
        header.extend(self.col_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, measure: DependenceMeasure) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let (row_label, col_label) = headers
            .get(0)
            .and_then(|h| h.split_once('\\'))
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .unwrap_or_default();
        let col_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut flat = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            row_ids.push(rec.get(0).unwrap_or_default().to_string());
            for field in rec.iter().skip(1) {
                flat.push(field.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{field}: {e}")))?);
            }
        }
        let values = Array2::from_shape_vec((row_ids.len(), col_ids.len()), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(row_label, row_ids, col_label, col_ids, values, None, measure)
    }
}
