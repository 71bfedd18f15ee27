//! File formats: data CSVs, mapped-feature sidecars and pairs files.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::dataset::{impute_simple, one_hot_encode, reorder_mapped_first, Dataset, RawColumn, RawTable, Warning};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

/// Reads a headered CSV. Empty cells and `NA` are missing. A column is
/// numeric when every observed cell parses as a float, categorical
/// otherwise.
pub fn read_raw_csv<R: Read>(name: &str, reader: R) -> Result<RawTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for rec in r.records() {
        let rec = rec?;
        for (j, c) in rec.iter().enumerate() {
            cells[j].push(c.to_string());
        }
    }
    let columns = headers
        .into_iter()
        .zip(cells)
        .map(|(h, col)| {
            let parsed: Option<Vec<Option<f64>>> = col
                .iter()
                .map(|c| if is_missing(c) { Some(None) } else { c.parse::<f64>().ok().map(Some) })
                .collect();
            match parsed {
                Some(v) => RawColumn::numeric(h, v),
                None => RawColumn::categorical(h, col.into_iter().map(|c| (!is_missing(&c)).then_some(c)).collect()),
            }
        })
        .collect();
    RawTable::new(name, columns)
}

/// Reads, imputes and one-hot encodes a data CSV.
pub fn read_dataset_csv(path: &Path) -> Result<(Dataset, Vec<Warning>)> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let table = read_raw_csv(name, File::open(path)?)?;
    one_hot_encode(&impute_simple(&table)?)
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.feature_names())?;
    for row in ds.values().rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Mapped-feature sidecar: one `name` or `name,weight` per line; blank lines
/// and `#` comments are skipped. Weights default to 1.
pub fn read_mapped_list<R: Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (name, weight) = match t.split_once(',') {
            Some((n, w)) => {
                let w: f64 = w.trim().parse().map_err(|e| Error::Parse(format!("line {}: weight `{}`: {e}", lineno + 1, w.trim())))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::invalid(format!("line {}: certainty weight must be positive, got {w}", lineno + 1)));
                }
                (n.trim(), w)
            }
            None => (t, 1.0),
        };
        out.push((name.to_string(), weight));
    }
    Ok(out)
}

pub fn write_mapped_list<W: Write>(mapped: &[(String, f64)], mut writer: W) -> Result<()> {
    for (name, w) in mapped {
        if *w == 1.0 {
            writeln!(writer, "{name}")?;
        } else {
            writeln!(writer, "{name},{w}")?;
        }
    }
    Ok(())
}

/// Pairs file: one `featureA,featureB` per line; blank lines and `#`
/// comments are skipped.
pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (a, b) = t
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `featureA,featureB`, got `{t}`", lineno + 1)))?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(pairs: &[(String, String)], mut writer: W) -> Result<()> {
    for (a, b) in pairs {
        writeln!(writer, "{a},{b}")?;
    }
    Ok(())
}

/// Loads a data CSV and applies its mapped sidecar: mapped columns move to
/// the front and take their certainty weights.
pub fn load_with_mapped(data: &Path, mapped: &[(String, f64)]) -> Result<(Dataset, Vec<Warning>)> {
    let (ds, warnings) = read_dataset_csv(data)?;
    let names: Vec<&str> = mapped.iter().map(|m| m.0.as_str()).collect();
    let ds = reorder_mapped_first(&ds, &names)?.with_certainty_weights(mapped)?;
    Ok((ds, warnings))
}
