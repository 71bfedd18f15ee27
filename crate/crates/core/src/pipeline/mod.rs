//! End-to-end matching: normalization, hold-out split, KMF, promotion of
//! confident KMF matches, chimeric refinement, and the Kang baseline.

mod bench;
mod evaluate;
mod tune;

pub use bench::{run_benchmark, BenchReport, ExperimentConfig, ReplicateResult, SummaryRow, Sweep, SweepParam, WilcoxonRow};
pub use evaluate::{auc, evaluate, evaluate_pairs, f1_naive, EvalReport, Outcome, PairOutcome};
pub use tune::{tune_hyperparams, TuneProtocol, TuneResult};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::chimeric::{chimeric_dependence, train, ChimericConfig, ChimericModel, Translation};
use crate::dataset::{standardize, unit_norm, Dataset};
use crate::error::{Error, Result};
use crate::kang::{kang_datasets, KangConfig};
use crate::kmf::{fingerprints, kmf_similarity, kmf_translate, promote_matches, PromotionPolicy};
use crate::matcher::{apply_by, apply_floor, gale_shapley, holdout_filter, Direction, MatchProposal};
use crate::rng::{derive_seed, rng_for};
use crate::stats::{pearson, pearson_pvalue, DependenceMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kmf,
    Chimeric,
    KmfThenChimeric,
    Kang,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Kmf => "kmf",
            Method::Chimeric => "chimeric",
            Method::KmfThenChimeric => "kmf_then_chimeric",
            Method::Kang => "kang",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Center and scale continuous columns to unit standard deviation.
    Standardize,
    /// Scale continuous columns to unit Euclidean norm.
    UnitNorm,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub normalization: Normalization,
    /// Share of rows held out for p-values.
    pub holdout_fraction: f64,
    pub fdr: f64,
    pub promotion: PromotionPolicy,
    pub promote_require_accepted: bool,
    /// Which translation feeds the final chimeric matching.
    pub direction: Translation,
    pub measure: DependenceMeasure,
    /// Optional minimum similarity for acceptance.
    pub floor: Option<f64>,
    pub chimeric: ChimericConfig,
    pub kang: KangConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            normalization: Normalization::Standardize,
            holdout_fraction: 0.25,
            fdr: 0.05,
            promotion: PromotionPolicy::Threshold(0.5),
            promote_require_accepted: true,
            direction: Translation::AToB,
            measure: DependenceMeasure::Pearson,
            floor: None,
            chimeric: ChimericConfig::default(),
            kang: KangConfig::default(),
            seed: 0,
        }
    }
}

/// Everything a method run produces.
#[derive(Clone, Debug)]
pub struct MethodOutput {
    /// Final proposals; `accepted` marks the reported matches.
    pub proposals: Vec<MatchProposal>,
    /// KMF proposals after hold-out filtering (KMF-based methods).
    pub kmf_proposals: Vec<MatchProposal>,
    /// Pairs promoted into the known map before chimeric training.
    pub promoted: Vec<MatchProposal>,
    pub model: Option<ChimericModel>,
    /// Normalized training rows as seen by the model, with any promoted
    /// features in the mapped prefix.
    pub train_a: Dataset,
    pub train_b: Dataset,
    pub holdout_a: Dataset,
    pub holdout_b: Dataset,
}

pub fn normalize(ds: &Dataset, how: Normalization) -> Dataset {
    match how {
        Normalization::Standardize => standardize(ds).0,
        Normalization::UnitNorm => unit_norm(ds).0,
        Normalization::None => ds.clone(),
    }
}

/// Random disjoint `(train, holdout)` row sets with at least 4 hold-out rows.
pub fn split_rows(n: usize, holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::invalid(format!("hold-out fraction {holdout_fraction} outside [0, 1)")));
    }
    let h = ((n as f64 * holdout_fraction).round() as usize).max(4);
    if n < h + 4 {
        return Err(Error::TooFewObservations { needed: h + 4, got: n });
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng_for(seed, &[0x5B17]));
    let (hold, train) = rows.split_at(h);
    let (mut hold, mut train) = (hold.to_vec(), train.to_vec());
    hold.sort_unstable();
    train.sort_unstable();
    Ok((train, hold))
}

fn unmapped_indices(ds: &Dataset) -> Vec<usize> {
    (ds.mapped_count()..ds.n_features()).collect()
}

struct Prepared {
    train_a: Dataset,
    train_b: Dataset,
    hold_a: Dataset,
    hold_b: Dataset,
}

fn prepare(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    if a.mapped_count() == 0 || b.mapped_count() != a.mapped_count() {
        return Err(Error::invalid(format!(
            "both datasets need the same nonzero mapped prefix (A: {}, B: {})",
            a.mapped_count(),
            b.mapped_count()
        )));
    }
    let a = normalize(a, cfg.normalization);
    let b = normalize(b, cfg.normalization);
    let (ta, ha) = split_rows(a.n_rows(), cfg.holdout_fraction, derive_seed(cfg.seed, &[1]))?;
    let (tb, hb) = split_rows(b.n_rows(), cfg.holdout_fraction, derive_seed(cfg.seed, &[2]))?;
    Ok(Prepared { train_a: a.select_rows(&ta), train_b: b.select_rows(&tb), hold_a: a.select_rows(&ha), hold_b: b.select_rows(&hb) })
}

fn kmf_stage(p: &Prepared, cfg: &PipelineConfig) -> Result<Vec<MatchProposal>> {
    if p.train_a.n_unmapped() == 0 || p.train_b.n_unmapped() == 0 {
        return Ok(Vec::new());
    }
    let fa = fingerprints(&p.train_a)?;
    let fb = fingerprints(&p.train_b)?;
    let sim = kmf_similarity(p.train_a.name(), &fa, p.train_b.name(), &fb)?;
    let props = gale_shapley(&sim, Direction::smaller_applies(&sim))?;
    let translated = kmf_translate(&p.hold_a, &fb)?;
    let mut out = holdout_filter(&props, &p.hold_a, &translated, cfg.fdr)?;
    if let Some(f) = cfg.floor {
        apply_floor(&mut out, f);
    }
    Ok(out)
}

fn chimeric_stage(p: &Prepared, cfg: &PipelineConfig) -> Result<(Vec<MatchProposal>, Option<ChimericModel>)> {
    if p.train_a.n_unmapped() == 0 || p.train_b.n_unmapped() == 0 {
        return Ok((Vec::new(), None));
    }
    let model = train(&p.train_a, &p.train_b, &cfg.chimeric)?;
    let ua = unmapped_indices(&p.train_a);
    let ub = unmapped_indices(&p.train_b);
    let sim = match cfg.direction {
        Translation::AToB => {
            let z = model.translate(&p.train_a, Translation::AToB)?;
            chimeric_dependence(&p.train_a.select_columns(&ua), &z.select_columns(&ub), cfg.measure)?
        }
        Translation::BToA => {
            let z = model.translate(&p.train_b, Translation::BToA)?;
            chimeric_dependence(&p.train_b.select_columns(&ub), &z.select_columns(&ua), cfg.measure)?.transpose()
        }
    };
    let sim = clamp_for_matching(sim);
    let props = gale_shapley(&sim, Direction::smaller_applies(&sim))?;
    let mut out = match cfg.direction {
        Translation::AToB => {
            let zh = model.translate(&p.hold_a, Translation::AToB)?;
            holdout_filter(&props, &p.hold_a, &zh, cfg.fdr)?
        }
        Translation::BToA => {
            let zh = model.translate(&p.hold_b, Translation::BToA)?;
            let n = p.hold_b.n_rows();
            let stats = props
                .iter()
                .map(|pr| {
                    let d = pearson(p.hold_b.column_by_name(&pr.feature_b)?, zh.column_by_name(&pr.feature_a)?)?;
                    let pv = if d.degenerate { 1.0 } else { pearson_pvalue(d.value, n)? };
                    Ok((d.value, pv))
                })
                .collect::<Result<Vec<_>>>()?;
            apply_by(&props, &stats, cfg.fdr)?
        }
    };
    if let Some(f) = cfg.floor {
        apply_floor(&mut out, f);
    }
    Ok((out, Some(model)))
}

fn clamp_for_matching(mut sim: crate::stats::SimilarityMatrix) -> crate::stats::SimilarityMatrix {
    sim.values.mapv_inplace(|v| if v.is_nan() { 0.0 } else { v });
    sim
}

/// KMF alone: fingerprints, Gale-Shapley, hold-out BY filter.
pub fn run_kmf(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<MethodOutput> {
    let p = prepare(a, b, cfg)?;
    let props = kmf_stage(&p, cfg)?;
    Ok(MethodOutput {
        proposals: props.clone(),
        kmf_proposals: props,
        promoted: Vec::new(),
        model: None,
        train_a: p.train_a,
        train_b: p.train_b,
        holdout_a: p.hold_a,
        holdout_b: p.hold_b,
    })
}

/// Chimeric autoencoders on the given known map only.
pub fn run_chimeric(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<MethodOutput> {
    let p = prepare(a, b, cfg)?;
    let (props, model) = chimeric_stage(&p, cfg)?;
    Ok(MethodOutput {
        proposals: props,
        kmf_proposals: Vec::new(),
        promoted: Vec::new(),
        model,
        train_a: p.train_a,
        train_b: p.train_b,
        holdout_a: p.hold_a,
        holdout_b: p.hold_b,
    })
}

/// KMF first; its confident matches join the known map; the chimeric model
/// then matches what is left. The result lists the promoted pairs followed
/// by the chimeric proposals.
pub fn run_two_stage(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<MethodOutput> {
    let mut p = prepare(a, b, cfg)?;
    let kmf_props = kmf_stage(&p, cfg)?;
    let (ta, tb, promoted) = promote_matches(&p.train_a, &p.train_b, &kmf_props, cfg.promotion, cfg.promote_require_accepted)?;
    let pairs: Vec<(String, String)> = promoted.iter().map(|q| (q.feature_a.clone(), q.feature_b.clone())).collect();
    let (ha, hb) = crate::kmf::extend_mapped(&p.hold_a, &p.hold_b, &pairs)?;
    p = Prepared { train_a: ta, train_b: tb, hold_a: ha, hold_b: hb };
    log::debug!("promoted {} KMF matches", promoted.len());
    let (chim, model) = chimeric_stage(&p, cfg)?;
    let mut proposals: Vec<MatchProposal> = promoted.iter().cloned().map(|q| MatchProposal { accepted: true, ..q }).collect();
    proposals.extend(chim);
    Ok(MethodOutput {
        proposals,
        kmf_proposals: kmf_props,
        promoted,
        model,
        train_a: p.train_a,
        train_b: p.train_b,
        holdout_a: p.hold_a,
        holdout_b: p.hold_b,
    })
}

/// The MI-matrix assignment baseline on all rows. Every proposal is accepted.
pub fn run_kang(a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<MethodOutput> {
    let na = normalize(a, cfg.normalization);
    let nb = normalize(b, cfg.normalization);
    let proposals = kang_datasets(&na, &nb, &cfg.kang)?;
    let empty = |d: &Dataset| d.select_rows(&[]);
    Ok(MethodOutput {
        proposals,
        kmf_proposals: Vec::new(),
        promoted: Vec::new(),
        model: None,
        holdout_a: empty(&na),
        holdout_b: empty(&nb),
        train_a: na,
        train_b: nb,
    })
}

pub fn run_method(method: Method, a: &Dataset, b: &Dataset, cfg: &PipelineConfig) -> Result<MethodOutput> {
    match method {
        Method::Kmf => run_kmf(a, b, cfg),
        Method::Chimeric => run_chimeric(a, b, cfg),
        Method::KmfThenChimeric => run_two_stage(a, b, cfg),
        Method::Kang => run_kang(a, b, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{build_scenario, make_covariance, CovarianceSpec, GeneratorFamily, Population, ScenarioConfig};

    fn scenario(k: usize, n: usize, seed: u64) -> crate::synthgen::Scenario {
        let cov = make_covariance(&CovarianceSpec { dim: 20, factor_dim: 10, seed }).unwrap();
        let pop = Population::new(GeneratorFamily::Gaussian, &cov, (10.0, 20.0), seed).unwrap();
        let a = pop.sample(n, "a", &mut rng_for(seed, &[1])).unwrap();
        let b = pop.sample(n, "b", &mut rng_for(seed, &[2])).unwrap();
        build_scenario(&a, &b, &ScenarioConfig::permutation(k), seed, 0, 0).unwrap()
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let (t, h) = split_rows(100, 0.25, 3).unwrap();
        assert_eq!(h.len(), 25);
        let mut all: Vec<usize> = t.iter().chain(&h).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(split_rows(6, 0.25, 0).is_err());
    }

    #[test]
    fn kmf_method_on_easy_scenario() {
        let sc = scenario(8, 4000, 11);
        let out = run_kmf(&sc.a, &sc.b, &PipelineConfig::default()).unwrap();
        let rep = evaluate(&out.proposals, &sc.spec).unwrap();
        assert!(rep.f1 > 0.8, "{rep:?}");
    }

    #[test]
    fn everything_mapped_gives_nothing() {
        let sc = scenario(20, 200, 12);
        let cfg = PipelineConfig { chimeric: ChimericConfig { epochs: 1, ..Default::default() }, ..Default::default() };
        let out = run_two_stage(&sc.a, &sc.b, &cfg).unwrap();
        assert!(out.proposals.is_empty());
        assert!(out.model.is_none());
        let rep = evaluate(&out.proposals, &sc.spec).unwrap();
        assert_eq!((rep.tp, rep.fp, rep.fn_), (0, 0, 0));
    }

    #[test]
    fn needs_anchors() {
        let sc = scenario(0, 100, 13);
        assert!(run_kmf(&sc.a, &sc.b, &PipelineConfig::default()).is_err());
    }

    #[test]
    fn kang_method_runs() {
        let sc = scenario(10, 2000, 14);
        let out = run_kang(&sc.a, &sc.b, &PipelineConfig::default()).unwrap();
        assert_eq!(out.proposals.len(), 10);
        assert!(out.proposals.iter().all(|p| p.accepted));
    }
}
