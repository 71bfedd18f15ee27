use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::MatchProposal;
use crate::stats::wilcoxon_ranksum;
use crate::synthgen::ScenarioSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    FalseNegative,
    /// Accepted pair between two features without a gold partner.
    Ignored,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub feature_a: String,
    pub feature_b: String,
    pub outcome: Outcome,
}

/// Scores of one set of proposals against a gold map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ignored: usize,
    pub gold_size: usize,
    pub precision: f64,
    pub recall: f64,
    /// `2TP / (2TP + FP + FN)`, taken as 1 when there is nothing to find and
    /// nothing was claimed.
    pub f1: f64,
    /// Accepted pairs in sorted order, then missed gold pairs.
    pub outcomes: Vec<PairOutcome>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores accepted proposals against the scenario's gold map.
pub fn evaluate(proposals: &[MatchProposal], spec: &ScenarioSpec) -> Result<EvalReport> {
    evaluate_pairs(proposals, &spec.gold_map, &spec.features_a, &spec.features_b)
}

/// Scores accepted proposals against `gold`. An accepted pair is a true
/// positive when it is a gold pair, a false positive when either feature has
/// a different gold partner, and ignored otherwise. Every proposal must name
/// features from `features_a` and `features_b`.
pub fn evaluate_pairs(
    proposals: &[MatchProposal],
    gold: &[(String, String)],
    features_a: &[String],
    features_b: &[String],
) -> Result<EvalReport> {
    let known_a: HashSet<&str> = features_a.iter().map(String::as_str).collect();
    let known_b: HashSet<&str> = features_b.iter().map(String::as_str).collect();
    let mut partner_a: HashMap<&str, &str> = HashMap::new();
    let mut partner_b: HashMap<&str, &str> = HashMap::new();
    for (a, b) in gold {
        if !known_a.contains(a.as_str()) {
            return Err(Error::UnknownFeature(a.clone()));
        }
        if !known_b.contains(b.as_str()) {
            return Err(Error::UnknownFeature(b.clone()));
        }
        if partner_a.insert(a, b).is_some() || partner_b.insert(b, a).is_some() {
            return Err(Error::invalid(format!("gold map is not one-to-one at ({a}, {b})")));
        }
    }
    for p in proposals {
        if !known_a.contains(p.feature_a.as_str()) {
            return Err(Error::UnknownFeature(p.feature_a.clone()));
        }
        if !known_b.contains(p.feature_b.as_str()) {
            return Err(Error::UnknownFeature(p.feature_b.clone()));
        }
    }

    let accepted: BTreeSet<(&str, &str)> =
        proposals.iter().filter(|p| p.accepted).map(|p| (p.feature_a.as_str(), p.feature_b.as_str())).collect();
    let mut outcomes = Vec::new();
    let (mut tp, mut fp, mut ignored) = (0, 0, 0);
    for &(a, b) in &accepted {
        let outcome = if partner_a.get(a) == Some(&b) {
            tp += 1;
            Outcome::TruePositive
        } else if partner_a.contains_key(a) || partner_b.contains_key(b) {
            fp += 1;
            Outcome::FalsePositive
        } else {
            ignored += 1;
            Outcome::Ignored
        };
        outcomes.push(PairOutcome { feature_a: a.to_string(), feature_b: b.to_string(), outcome });
    }
    let mut missed: Vec<&(String, String)> = gold.iter().filter(|(a, b)| !accepted.contains(&(a.as_str(), b.as_str()))).collect();
    missed.sort();
    for (a, b) in &missed {
        outcomes.push(PairOutcome { feature_a: a.clone(), feature_b: b.clone(), outcome: Outcome::FalseNegative });
    }
    let fn_ = missed.len();
    Ok(EvalReport {
        tp,
        fp,
        fn_,
        ignored,
        gold_size: gold.len(),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, gold.len()),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        outcomes,
    })
}

/// F1 recomputed from plain pair sets, used to cross-check [`evaluate`].
pub fn f1_naive(accepted: &[(String, String)], gold: &[(String, String)]) -> f64 {
    let acc: BTreeSet<&(String, String)> = accepted.iter().collect();
    let gold_set: BTreeSet<&(String, String)> = gold.iter().collect();
    let gold_a: BTreeSet<&String> = gold.iter().map(|(a, _)| a).collect();
    let gold_b: BTreeSet<&String> = gold.iter().map(|(_, b)| b).collect();
    let tp = acc.intersection(&gold_set).count();
    let fp = acc.difference(&gold_set).filter(|(a, b)| gold_a.contains(a) || gold_b.contains(b)).count();
    let fn_ = gold_set.difference(&acc).count();
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Area under the ROC curve of `scores` for separating `labels == true`
/// from `labels == false`, as `U / (n₁ n₀)` with ties counted half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let u = wilcoxon_ranksum(&pos, &neg)?.statistic;
    Ok(u / (pos.len() as f64 * neg.len() as f64))
}
