//! Turning a similarity matrix into a one-to-one feature mapping.
//!
//! Deferred acceptance (Gale-Shapley) with capacity one covers both the
//! equal-size stable marriage case and the unequal-size hospital-resident
//! case. Proposals can then be screened on held-out rows with
//! Benjamini-Yekutieli control of the false discovery rate.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::stats::{by_stepdown, pearson, pearson_pvalue, SimilarityMatrix};

/// One candidate pair. `feature_a` is always a row id of the similarity
/// matrix, `feature_b` a column id, whichever side proposed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchProposal {
    pub feature_a: String,
    pub feature_b: String,
    pub similarity: f64,
    /// Hold-out Pearson correlation, NaN until filtered.
    pub holdout_stat: f64,
    /// NaN until filtered.
    pub p_value: f64,
    pub accepted: bool,
    /// Position of the partner in the proposer's list, 1-based. Pinned pairs
    /// carry 0.
    pub rank_of_choice: usize,
}

impl MatchProposal {
    pub fn new(feature_a: impl Into<String>, feature_b: impl Into<String>, similarity: f64) -> Self {
        Self {
            feature_a: feature_a.into(),
            feature_b: feature_b.into(),
            similarity,
            holdout_stat: f64::NAN,
            p_value: f64::NAN,
            accepted: true,
            rank_of_choice: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AApplies,
    BApplies,
}

impl Direction {
    /// The side with fewer features applies; A on a tie.
    pub fn smaller_applies(sim: &SimilarityMatrix) -> Self {
        if sim.ncols() < sim.nrows() {
            Direction::BApplies
        } else {
            Direction::AApplies
        }
    }
}

/// Strict preference orders derived from similarity ranks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreferenceProfile {
    pub applicants: Vec<String>,
    pub reviewers: Vec<String>,
    /// Acceptable reviewers of each applicant, most preferred first.
    pub applicant_prefs: Vec<Vec<usize>>,
    /// `reviewer_rank[r][a]`: position of applicant `a` in reviewer `r`'s
    /// order, `None` when forbidden.
    pub reviewer_rank: Vec<Vec<Option<usize>>>,
}

impl PreferenceProfile {
    /// Higher similarity is preferred; ties go to the lower index and
    /// degenerate entries rank below every regular one. Forbidden pairs
    /// (given as `(row id, column id)`) are unacceptable to both sides.
    pub fn from_similarity(sim: &SimilarityMatrix, direction: Direction, forbidden: &[(String, String)]) -> Result<Self> {
        if let Some(v) = sim.values.iter().find(|v| v.is_nan()) {
            return Err(Error::invalid(format!("similarity matrix contains {v}")));
        }
        let mut banned = HashSet::new();
        for (a, b) in forbidden {
            let i = sim.row_index(a).ok_or_else(|| Error::UnknownFeature(a.clone()))?;
            let j = sim.col_index(b).ok_or_else(|| Error::UnknownFeature(b.clone()))?;
            banned.insert((i, j));
        }
        let (n_app, n_rev) = match direction {
            Direction::AApplies => (sim.nrows(), sim.ncols()),
            Direction::BApplies => (sim.ncols(), sim.nrows()),
        };
        let cell = |app: usize, rev: usize| match direction {
            Direction::AApplies => (app, rev),
            Direction::BApplies => (rev, app),
        };
        let score = |i: usize, j: usize| {
            if sim.degenerate[[i, j]] {
                f64::NEG_INFINITY
            } else {
                sim.values[[i, j]]
            }
        };
        let order = |n: usize, f: &dyn Fn(usize) -> Option<f64>| -> Vec<usize> {
            let mut idx: Vec<usize> = (0..n).filter(|&x| f(x).is_some()).collect();
            idx.sort_by(|&x, &y| f(y).unwrap().total_cmp(&f(x).unwrap()).then(x.cmp(&y)));
            idx
        };
        let applicant_prefs = (0..n_app)
            .map(|a| {
                order(n_rev, &|r| {
                    let (i, j) = cell(a, r);
                    (!banned.contains(&(i, j))).then(|| score(i, j))
                })
            })
            .collect();
        let reviewer_rank = (0..n_rev)
            .map(|r| {
                let ord = order(n_app, &|a| {
                    let (i, j) = cell(a, r);
                    (!banned.contains(&(i, j))).then(|| score(i, j))
                });
                let mut rank = vec![None; n_app];
                for (pos, a) in ord.into_iter().enumerate() {
                    rank[a] = Some(pos);
                }
                rank
            })
            .collect();
        let (applicants, reviewers) = match direction {
            Direction::AApplies => (sim.row_ids.clone(), sim.col_ids.clone()),
            Direction::BApplies => (sim.col_ids.clone(), sim.row_ids.clone()),
        };
        Ok(Self { applicants, reviewers, applicant_prefs, reviewer_rank })
    }
}

/// Applicant-proposing deferred acceptance with one slot per reviewer.
/// Returns, per applicant, its reviewer and the 1-based rank of that
/// reviewer in its list.
pub fn deferred_acceptance(profile: &PreferenceProfile) -> Vec<Option<(usize, usize)>> {
    let n_app = profile.applicant_prefs.len();
    let n_rev = profile.reviewer_rank.len();
    let mut next = vec![0usize; n_app];
    let mut holder: Vec<Option<usize>> = vec![None; n_rev];
    let mut free: Vec<usize> = (0..n_app).rev().collect();
    while let Some(a) = free.pop() {
        let prefs = &profile.applicant_prefs[a];
        let Some(&r) = prefs.get(next[a]) else { continue };
        next[a] += 1;
        let Some(rank_a) = profile.reviewer_rank[r][a] else {
            free.push(a);
            continue;
        };
        match holder[r] {
            None => holder[r] = Some(a),
            Some(cur) if rank_a < profile.reviewer_rank[r][cur].expect("held applicant is acceptable") => {
                holder[r] = Some(a);
                free.push(cur);
            }
            Some(_) => free.push(a),
        }
    }
    let mut out = vec![None; n_app];
    for (r, h) in holder.into_iter().enumerate() {
        if let Some(a) = h {
            out[a] = Some((r, next[a]));
        }
    }
    out
}

fn proposals_from(sim: &SimilarityMatrix, direction: Direction, forbidden: &[(String, String)]) -> Result<Vec<MatchProposal>> {
    if sim.is_empty() {
        return Ok(Vec::new());
    }
    let profile = PreferenceProfile::from_similarity(sim, direction, forbidden)?;
    let mut out = Vec::new();
    for (app, m) in deferred_acceptance(&profile).into_iter().enumerate() {
        let Some((rev, rank)) = m else { continue };
        let (i, j) = match direction {
            Direction::AApplies => (app, rev),
            Direction::BApplies => (rev, app),
        };
        let mut p = MatchProposal::new(sim.row_ids[i].clone(), sim.col_ids[j].clone(), sim.values[[i, j]]);
        p.rank_of_choice = rank;
        out.push(p);
    }
    out.sort_by_key(|p| sim.row_index(&p.feature_a));
    Ok(out)
}

/// Stable one-to-one matching of rows to columns. Unmatched features are
/// omitted. Proposals come back ordered by row.
pub fn gale_shapley(sim: &SimilarityMatrix, direction: Direction) -> Result<Vec<MatchProposal>> {
    proposals_from(sim, direction, &[])
}

/// Scores each proposal by the Pearson correlation between the A column and
/// the translated B column on held-out rows, then runs BY at level `q`.
/// `translated` holds B-format columns computed from the same rows as
/// `holdout_a`.
pub fn holdout_filter(proposals: &[MatchProposal], holdout_a: &Dataset, translated: &Dataset, q: f64) -> Result<Vec<MatchProposal>> {
    if holdout_a.n_rows() != translated.n_rows() {
        return Err(Error::LengthMismatch { left: holdout_a.n_rows(), right: translated.n_rows() });
    }
    let n = holdout_a.n_rows();
    let mut stats = Vec::with_capacity(proposals.len());
    for p in proposals {
        let x = holdout_a.column_by_name(&p.feature_a)?;
        let y = translated.column_by_name(&p.feature_b)?;
        let dep = pearson(x, y)?;
        let pv = if dep.degenerate { 1.0 } else { pearson_pvalue(dep.value, n)? };
        stats.push((dep.value, pv));
    }
    apply_by(proposals, &stats, q)
}

/// Attaches `(statistic, p)` to each proposal and sets `accepted` by BY at `q`.
pub fn apply_by(proposals: &[MatchProposal], stats: &[(f64, f64)], q: f64) -> Result<Vec<MatchProposal>> {
    if proposals.len() != stats.len() {
        return Err(Error::LengthMismatch { left: proposals.len(), right: stats.len() });
    }
    let pv: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let mask = by_stepdown(&pv, q)?;
    Ok(proposals
        .iter()
        .zip(stats)
        .zip(mask)
        .map(|((p, &(stat, pval)), acc)| MatchProposal { holdout_stat: stat, p_value: pval, accepted: acc, ..p.clone() })
        .collect())
}

/// Rejects accepted proposals whose similarity falls below `floor`.
pub fn apply_floor(proposals: &mut [MatchProposal], floor: f64) {
    for p in proposals.iter_mut().filter(|p| p.similarity < floor) {
        p.accepted = false;
    }
}

/// Fixes user-confirmed pairs and rematches the rest with `forbidden` pairs
/// excluded. Pinned pairs come first, accepted, with rank 0.
pub fn pin_and_rerun(
    sim: &SimilarityMatrix,
    direction: Direction,
    pinned: &[(String, String)],
    forbidden: &[(String, String)],
) -> Result<Vec<MatchProposal>> {
    let mut rows_used = HashSet::new();
    let mut cols_used = HashSet::new();
    let mut out = Vec::new();
    for (a, b) in pinned {
        let i = sim.row_index(a).ok_or_else(|| Error::UnknownFeature(a.clone()))?;
        let j = sim.col_index(b).ok_or_else(|| Error::UnknownFeature(b.clone()))?;
        if !rows_used.insert(i) {
            return Err(Error::Conflict(format!("{a} pinned twice")));
        }
        if !cols_used.insert(j) {
            return Err(Error::Conflict(format!("{b} pinned twice")));
        }
        let mut p = MatchProposal::new(a.clone(), b.clone(), sim.values[[i, j]]);
        p.rank_of_choice = 0;
        out.push(p);
    }
    let rows: Vec<usize> = (0..sim.nrows()).filter(|i| !rows_used.contains(i)).collect();
    let cols: Vec<usize> = (0..sim.ncols()).filter(|j| !cols_used.contains(j)).collect();
    let sub = sim.submatrix(&rows, &cols);
    let forbidden: Vec<(String, String)> = forbidden
        .iter()
        .filter(|(a, b)| {
            let known = sim.row_index(a).is_some() && sim.col_index(b).is_some();
            !known || (sub.row_index(a).is_some() && sub.col_index(b).is_some())
        })
        .cloned()
        .collect();
    out.extend(proposals_from(&sub, direction, &forbidden)?);
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Proposals CSV: `featureA,featureB,similarity,p_value,accepted,rank_of_choice`.
/// Untested p-values are written as empty cells.
pub fn write_proposals<W: Write>(proposals: &[MatchProposal], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["featureA", "featureB", "similarity", "p_value", "accepted", "rank_of_choice"])?;
    for p in proposals {
        w.write_record([
            p.feature_a.clone(),
            p.feature_b.clone(),
            fmt_num(p.similarity),
            fmt_num(p.p_value),
            p.accepted.to_string(),
            p.rank_of_choice.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_proposals<R: Read>(reader: R) -> Result<Vec<MatchProposal>> {
    let mut r = csv::Reader::from_reader(reader);
    let num = |s: &str| -> Result<f64> {
        if s.trim().is_empty() {
            Ok(f64::NAN)
        } else {
            s.trim().parse().map_err(|e| Error::Parse(format!("{s}: {e}")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(Error::Parse(format!("proposal row has {} fields, expected 6", rec.len())));
        }
        out.push(MatchProposal {
            feature_a: rec[0].to_string(),
            feature_b: rec[1].to_string(),
            similarity: num(&rec[2])?,
            holdout_stat: f64::NAN,
            p_value: num(&rec[3])?,
            accepted: rec[4].trim().parse().map_err(|e| Error::Parse(format!("{}: {e}", &rec[4])))?,
            rank_of_choice: rec[5].trim().parse().map_err(|e| Error::Parse(format!("{}: {e}", &rec[5])))?,
        });
    }
    Ok(out)
}
