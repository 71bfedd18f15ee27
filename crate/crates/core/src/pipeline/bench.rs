use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, f1_naive};
use super::{normalize, run_method, Method, PipelineConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::stats::{mutual_information, pearson, wilcoxon_ranksum, DEFAULT_MI_BINS};
use crate::synthgen::{build_scenario, make_covariance, CovarianceSpec, GeneratorFamily, MapKind, Population, Scenario, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    KMapped,
    NSamples,
    LatentDim,
    /// Features present only in B (dropped from A).
    ExtraFeatures,
}

impl SweepParam {
    pub fn label(self) -> &'static str {
        match self {
            SweepParam::KMapped => "k_mapped",
            SweepParam::NSamples => "n_samples",
            SweepParam::LatentDim => "latent_dim",
            SweepParam::ExtraFeatures => "extra_features",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<usize>,
}

/// A full synthetic experiment: data generator, scenario shape, methods,
/// one swept parameter and the replication counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub family: GeneratorFamily,
    pub dim: usize,
    pub factor_dim: usize,
    pub n_samples: usize,
    pub mean_range: (f64, f64),
    pub map_kind: MapKind,
    pub k_mapped: usize,
    pub drop_a: usize,
    pub drop_b: usize,
    pub transform_count: usize,
    pub methods: Vec<Method>,
    pub pipeline: PipelineConfig,
    pub sweep: Sweep,
    /// Independent draws of data and mapped features.
    pub n_trials: usize,
    /// Column shuffles per trial.
    pub n_permutations: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: GeneratorFamily::Gaussian,
            dim: 20,
            factor_dim: 10,
            n_samples: 10_000,
            mean_range: (10.0, 20.0),
            map_kind: MapKind::Permutation,
            k_mapped: 4,
            drop_a: 0,
            drop_b: 0,
            transform_count: 0,
            methods: vec![Method::Kmf, Method::KmfThenChimeric, Method::Kang],
            pipeline: PipelineConfig::default(),
            sweep: Sweep { param: SweepParam::KMapped, values: vec![2, 4, 6, 8, 10] },
            n_trials: 3,
            n_permutations: 3,
            seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.values.is_empty() {
            return Err(Error::invalid("sweep has no values"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        if self.n_trials == 0 || self.n_permutations == 0 {
            return Err(Error::invalid("n_trials and n_permutations must be at least 1"));
        }
        Ok(())
    }

    /// Scenario parameters and pipeline settings at one sweep value.
    fn at(&self, value: usize) -> (ExperimentConfig, ScenarioConfig) {
        let mut c = self.clone();
        match self.sweep.param {
            SweepParam::KMapped => c.k_mapped = value,
            SweepParam::NSamples => c.n_samples = value,
            SweepParam::LatentDim => c.pipeline.chimeric.latent_dim = value,
            SweepParam::ExtraFeatures => {
                c.drop_a = value;
                if c.map_kind != MapKind::Partial {
                    c.map_kind = if value > 0 { MapKind::Onto } else { MapKind::Permutation };
                }
            }
        }
        let sc = ScenarioConfig {
            map_kind: c.map_kind,
            k_mapped: c.k_mapped,
            drop_a: c.drop_a,
            drop_b: c.drop_b,
            transform_count: c.transform_count,
        };
        (c, sc)
    }

    /// The scenario of one replicate. Data depend on the trial only, so every
    /// sweep value and permutation of a trial shares the same population and
    /// draws.
    pub fn scenario(&self, value: usize, trial: usize, permutation: usize) -> Result<Scenario> {
        let (c, sc) = self.at(value);
        let data_seed = derive_seed(self.seed, &[0xDA7A, trial as u64]);
        let cov = make_covariance(&CovarianceSpec { dim: c.dim, factor_dim: c.factor_dim, seed: data_seed })?;
        let pop = Population::new(c.family, &cov, c.mean_range, data_seed)?;
        let a = pop.sample(c.n_samples, "a", &mut rng_for(data_seed, &[1]))?;
        let b = pop.sample(c.n_samples, "b", &mut rng_for(data_seed, &[2]))?;
        build_scenario(&a, &b, &sc, data_seed, trial as u64, permutation as u64)
    }

    /// Pipeline settings of one replicate, with derived seeds.
    pub fn replicate_pipeline(&self, value: usize, trial: usize, permutation: usize) -> PipelineConfig {
        let (c, _) = self.at(value);
        let path = [trial as u64, permutation as u64];
        let mut p = c.pipeline;
        p.seed = derive_seed(self.seed, &[0x91BE, path[0], path[1]]);
        p.chimeric.seed = derive_seed(self.seed, &[0xC413, path[0], path[1]]);
        p.kang.seed = derive_seed(self.seed, &[0x4A46, path[0], path[1]]);
        p
    }
}

/// One method on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub sweep_value: usize,
    pub trial: usize,
    pub permutation: usize,
    pub method: Method,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Mean Pearson correlation between reconstructed B-only features and
    /// their withheld values in A.
    pub unshared_r: Option<f64>,
    /// Mean MI between the translation of each transformed feature and its
    /// source column in A.
    pub transformed_mi: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: usize,
    pub method: Method,
    pub replicates: usize,
    pub failures: usize,
    pub mean_f1: f64,
    /// Sample standard deviation; absent with a single replicate.
    pub sd_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRow {
    pub sweep_value: usize,
    pub method_a: Method,
    pub method_b: Method,
    pub statistic: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub param: SweepParam,
    pub replicates: Vec<ReplicateResult>,
    pub summary: Vec<SummaryRow>,
    pub wilcoxon: Vec<WilcoxonRow>,
}

fn extras(sc: &Scenario, model: &crate::chimeric::ChimericModel, cfg: &PipelineConfig) -> Result<(Option<f64>, Option<f64>)> {
    let a = normalize(&sc.a, cfg.normalization);
    let z = model.translate(&a, crate::chimeric::Translation::AToB)?;
    let source_of = |b_name: &str| sc.spec.features_b.iter().position(|f| f == b_name).map(|j| sc.b_sources[j].clone());

    let mut rs = Vec::new();
    for src in &sc.spec.dropped_a {
        let Some(j) = sc.b_sources.iter().position(|s| s == src) else { continue };
        let r = pearson(z.column_by_name(&sc.spec.features_b[j])?, sc.withheld_a.column_by_name(src)?)?;
        rs.push(r.value);
    }
    let mut mis = Vec::new();
    for (b_name, _) in &sc.spec.transformed_features {
        let Some(src) = source_of(b_name) else { continue };
        let mi = mutual_information(z.column_by_name(b_name)?, a.column_by_name(&src)?, DEFAULT_MI_BINS)?;
        mis.push(mi.value);
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok((mean(rs), mean(mis)))
}

fn run_replicate(cfg: &ExperimentConfig, value: usize, trial: usize, perm: usize) -> Vec<ReplicateResult> {
    let blank = |method: Method, error: Option<String>| ReplicateResult {
        sweep_value: value,
        trial,
        permutation: perm,
        method,
        f1: f64::NAN,
        tp: 0,
        fp: 0,
        fn_: 0,
        unshared_r: None,
        transformed_mi: None,
        error,
    };
    let sc = match cfg.scenario(value, trial, perm) {
        Ok(sc) => sc,
        Err(e) => return cfg.methods.iter().map(|&m| blank(m, Some(e.to_string()))).collect(),
    };
    let pcfg = cfg.replicate_pipeline(value, trial, perm);
    cfg.methods
        .iter()
        .map(|&method| {
            let attempt = || -> Result<ReplicateResult> {
                let out = run_method(method, &sc.a, &sc.b, &pcfg)?;
                let rep = evaluate(&out.proposals, &sc.spec)?;
                let accepted: Vec<(String, String)> =
                    out.proposals.iter().filter(|p| p.accepted).map(|p| (p.feature_a.clone(), p.feature_b.clone())).collect();
                let naive = f1_naive(&accepted, &sc.spec.gold_map);
                if (naive - rep.f1).abs() > 1e-12 {
                    return Err(Error::invalid(format!("F1 cross-check failed: {} vs {naive}", rep.f1)));
                }
                let (unshared_r, transformed_mi) = match &out.model {
                    Some(m) => extras(&sc, m, &pcfg)?,
                    None => (None, None),
                };
                Ok(ReplicateResult { f1: rep.f1, tp: rep.tp, fp: rep.fp, fn_: rep.fn_, unshared_r, transformed_mi, ..blank(method, None) })
            };
            attempt().unwrap_or_else(|e| {
                log::warn!("{} at {value} (trial {trial}, permutation {perm}) failed: {e}", method.label());
                blank(method, Some(e.to_string()))
            })
        })
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs every replicate of the sweep (in parallel), aggregates, and writes
/// `replicates.csv`, `summary.csv` and `wilcoxon.csv` to `cfg.out_dir` when
/// set. A failing replicate is recorded with its error and the run goes on.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..cfg.n_trials).flat_map(move |t| (0..cfg.n_permutations).map(move |p| (v, t, p))))
        .collect();
    let replicates: Vec<ReplicateResult> =
        jobs.par_iter().map(|&(v, t, p)| run_replicate(cfg, v, t, p)).collect::<Vec<_>>().into_iter().flatten().collect();

    let mut summary = Vec::new();
    let mut wilcoxon = Vec::new();
    for &v in &cfg.sweep.values {
        let f1s = |m: Method| -> Vec<f64> {
            replicates.iter().filter(|r| r.sweep_value == v && r.method == m && r.error.is_none()).map(|r| r.f1).collect()
        };
        for &m in &cfg.methods {
            let ok = f1s(m);
            let total = replicates.iter().filter(|r| r.sweep_value == v && r.method == m).count();
            let (mean_f1, sd_f1) = if ok.is_empty() { (f64::NAN, None) } else { mean_sd(&ok) };
            summary.push(SummaryRow { sweep_value: v, method: m, replicates: total, failures: total - ok.len(), mean_f1, sd_f1 });
        }
        for (i, &ma) in cfg.methods.iter().enumerate() {
            for &mb in &cfg.methods[i + 1..] {
                if let Ok(t) = wilcoxon_ranksum(&f1s(ma), &f1s(mb)) {
                    wilcoxon.push(WilcoxonRow {
                        sweep_value: v,
                        method_a: ma,
                        method_b: mb,
                        statistic: t.statistic,
                        z: t.z,
                        p_value: t.p_value,
                        significant: t.p_value < 0.05,
                    });
                }
            }
        }
    }
    let report = BenchReport { param: cfg.sweep.param, replicates, summary, wilcoxon };
    if let Some(dir) = &cfg.out_dir {
        report.write_csvs(dir)?;
    }
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => String::new(),
    }
}

impl BenchReport {
    /// Mean F1 of `method` over all successful replicates.
    pub fn mean_f1(&self, method: Method) -> f64 {
        let v: Vec<f64> = self.replicates.iter().filter(|r| r.method == method && r.error.is_none()).map(|r| r.f1).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("param,value,trial,permutation,method,f1,tp,fp,fn,unshared_r,transformed_mi,error\n");
        for r in &self.replicates {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.param.label(),
                r.sweep_value,
                r.trial,
                r.permutation,
                r.method.label(),
                cell(Some(r.f1)),
                r.tp,
                r.fp,
                r.fn_,
                cell(r.unshared_r),
                cell(r.transformed_mi),
                err
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("param,value,method,replicates,failures,mean_f1,sd_f1\n");
        for r in &self.summary {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.param.label(),
                r.sweep_value,
                r.method.label(),
                r.replicates,
                r.failures,
                cell(Some(r.mean_f1)),
                cell(r.sd_f1)
            );
        }
        s
    }

    pub fn wilcoxon_csv(&self) -> String {
        let mut s = String::from("param,value,method_a,method_b,u,z,p_value,significant\n");
        for r in &self.wilcoxon {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.param.label(),
                r.sweep_value,
                r.method_a.label(),
                r.method_b.label(),
                r.statistic,
                r.z,
                r.p_value,
                r.significant
            );
        }
        s
    }

    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("replicates.csv"), self.replicates_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        fs::write(dir.join("wilcoxon.csv"), self.wilcoxon_csv())?;
        Ok(())
    }
}
