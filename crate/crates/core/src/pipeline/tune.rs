use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::evaluate::evaluate_pairs;
use super::{run_method, Method, PipelineConfig};
use crate::dataset::{reorder_mapped_first, Dataset};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TuneProtocol {
    /// One fold per mapped feature, hiding that feature.
    LeaveOneOut,
    /// Each fold hides a random half of the mapped features.
    HalfSplit { folds: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_index: usize,
    pub best: PipelineConfig,
    /// `scores[g][f]`: recovery F1 of grid point `g` on fold `f`.
    pub scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
}

fn folds(mapped: &[String], protocol: TuneProtocol, seed: u64) -> Result<Vec<Vec<String>>> {
    let k = mapped.len();
    match protocol {
        TuneProtocol::LeaveOneOut => {
            if k < 2 {
                return Err(Error::invalid(format!("leave-one-out needs at least 2 mapped features, got {k}")));
            }
            Ok(mapped.iter().map(|m| vec![m.clone()]).collect())
        }
        TuneProtocol::HalfSplit { folds } => {
            if k < 4 {
                return Err(Error::invalid(format!("half-split needs at least 4 mapped features, got {k}")));
            }
            if folds == 0 {
                return Err(Error::invalid("half-split needs at least one fold"));
            }
            Ok((0..folds)
                .map(|f| {
                    let mut m = mapped.to_vec();
                    m.shuffle(&mut rng_for(seed, &[0x7E5E, f as u64]));
                    m.truncate(k / 2);
                    m
                })
                .collect())
        }
    }
}

/// Cross-validated choice among `grid`: each fold demotes some mapped
/// features to unmapped on both sides, runs `method`, and scores how many of
/// the hidden pairs come back. Mapped features must share names across `a`
/// and `b`.
pub fn tune_hyperparams(
    a: &Dataset,
    b: &Dataset,
    grid: &[PipelineConfig],
    protocol: TuneProtocol,
    method: Method,
    seed: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::invalid("hyperparameter grid is empty"));
    }
    let mapped = a.mapped_names();
    if mapped != b.mapped_names() {
        return Err(Error::invalid("mapped features must carry the same names in both datasets"));
    }
    let folds = folds(&mapped, protocol, seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    for (g, cfg) in grid.iter().enumerate() {
        let mut row = Vec::with_capacity(folds.len());
        for (f, hidden) in folds.iter().enumerate() {
            let kept: Vec<&String> = mapped.iter().filter(|m| !hidden.contains(m)).collect();
            let fa = reorder_mapped_first(a, &kept)?;
            let fb = reorder_mapped_first(b, &kept)?;
            let out = run_method(method, &fa, &fb, cfg)?;
            let gold: Vec<(String, String)> = hidden.iter().map(|h| (h.clone(), h.clone())).collect();
            let rep = evaluate_pairs(&out.proposals, &gold, &fa.unmapped_names(), &fb.unmapped_names())?;
            log::info!("grid point {g}, fold {f}: F1 {:.3}", rep.f1);
            row.push(rep.f1);
        }
        scores.push(row);
    }
    let mean_scores: Vec<f64> = scores.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let mut best_index = 0;
    for (i, &m) in mean_scores.iter().enumerate() {
        if m > mean_scores[best_index] {
            best_index = i;
        }
    }
    Ok(TuneResult { best_index, best: grid[best_index].clone(), scores, mean_scores })
}
