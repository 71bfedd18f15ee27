//! Known-map fingerprints: each unmapped column is described by its vector
//! of Pearson correlations with the known-mapped columns, and fingerprints
//! are compared across databases by cosine similarity.

use std::collections::HashSet;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matcher::MatchProposal;
use crate::stats::{cosine, pearson, DependenceMeasure, SimilarityMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub feature: String,
    /// Correlation with each mapped column, in mapped order.
    pub values: Array1<f64>,
    pub degenerate: Vec<bool>,
}

/// One fingerprint per unmapped column. Zero-variance pairs contribute 0.
pub fn fingerprints(ds: &Dataset) -> Result<Vec<Fingerprint>> {
    let k = ds.mapped_count();
    if k == 0 {
        return Err(Error::invalid(format!("dataset `{}` has no mapped features", ds.name())));
    }
    (k..ds.n_features())
        .map(|j| {
            let mut values = Array1::zeros(k);
            let mut degenerate = vec![false; k];
            for m in 0..k {
                let d = pearson(ds.column(j), ds.column(m))?;
                values[m] = d.value;
                degenerate[m] = d.degenerate;
            }
            Ok(Fingerprint { feature: ds.features()[j].name.clone(), values, degenerate })
        })
        .collect()
}

/// Cosine similarity between every A fingerprint (rows) and B fingerprint
/// (columns).
pub fn kmf_similarity(label_a: &str, fp_a: &[Fingerprint], label_b: &str, fp_b: &[Fingerprint]) -> Result<SimilarityMatrix> {
    let ka = fp_a.first().map(|f| f.values.len());
    let kb = fp_b.first().map(|f| f.values.len());
    if let (Some(ka), Some(kb)) = (ka, kb) {
        if ka != kb || fp_a.iter().chain(fp_b).any(|f| f.values.len() != ka) {
            return Err(Error::Shape(format!("fingerprint lengths differ ({ka} vs {kb})")));
        }
    }
    let mut values = Array2::zeros((fp_a.len(), fp_b.len()));
    let mut degenerate = Array2::from_elem((fp_a.len(), fp_b.len()), false);
    for (i, a) in fp_a.iter().enumerate() {
        for (j, b) in fp_b.iter().enumerate() {
            let d = cosine(a.values.view(), b.values.view())?;
            values[[i, j]] = d.value;
            degenerate[[i, j]] = d.degenerate;
        }
    }
    SimilarityMatrix::new(
        label_a,
        fp_a.iter().map(|f| f.feature.clone()).collect(),
        label_b,
        fp_b.iter().map(|f| f.feature.clone()).collect(),
        values,
        Some(degenerate),
        DependenceMeasure::Cosine,
    )
}

/// Grid of fingerprints: one row per unmapped feature, one column per
/// mapped feature.
pub fn write_fingerprints_csv<W: Write>(fps: &[Fingerprint], mapped: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["feature".to_string()];
    header.extend(mapped.iter().cloned());
    w.write_record(&header)?;
    for f in fps {
        if f.values.len() != mapped.len() {
            return Err(Error::Shape(format!("fingerprint of `{}` has {} entries, {} mapped names", f.feature, f.values.len(), mapped.len())));
        }
        let mut rec = vec![f.feature.clone()];
        rec.extend(f.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn standardized(col: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd > 0.0 {
        col.mapv(|v| (v - mean) / sd)
    } else {
        Array1::zeros(col.len())
    }
}

/// Predicts B's unmapped columns on A's rows as the fingerprint-weighted sum
/// of A's standardized mapped columns. Columns are named after B's features.
pub fn kmf_translate(a: &Dataset, fp_b: &[Fingerprint]) -> Result<Dataset> {
    let k = a.mapped_count();
    if let Some(f) = fp_b.iter().find(|f| f.values.len() != k) {
        return Err(Error::Shape(format!("fingerprint of `{}` has {} entries, A has {k} mapped", f.feature, f.values.len())));
    }
    let n = a.n_rows();
    let mut z = Array2::zeros((n, k));
    for m in 0..k {
        z.column_mut(m).assign(&standardized(a.column(m)));
    }
    let cols = fp_b.iter().map(|f| (f.feature.clone(), z.dot(&f.values).to_vec())).collect();
    if fp_b.is_empty() {
        return Dataset::new("A->B", Array2::zeros((n, 0)), vec![]);
    }
    Dataset::from_columns("A->B", cols)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum PromotionPolicy {
    /// Every eligible proposal with similarity at or above the value.
    Threshold(f64),
    /// The best `ceil(fraction · eligible)` proposals by similarity.
    TopFraction(f64),
}

/// Selects proposals to add to the known map. With `require_accepted`, only
/// proposals that passed the hold-out filter are eligible. The result is in
/// descending similarity order.
pub fn select_promotions(proposals: &[MatchProposal], policy: PromotionPolicy, require_accepted: bool) -> Result<Vec<MatchProposal>> {
    let mut eligible: Vec<&MatchProposal> = proposals.iter().filter(|p| !require_accepted || p.accepted).collect();
    eligible.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    let chosen: Vec<MatchProposal> = match policy {
        PromotionPolicy::Threshold(t) => eligible.into_iter().filter(|p| p.similarity >= t).cloned().collect(),
        PromotionPolicy::TopFraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("top fraction {f} outside [0, 1]")));
            }
            let take = (f * eligible.len() as f64).ceil() as usize;
            eligible.into_iter().take(take).cloned().collect()
        }
    };
    Ok(chosen)
}

/// Appends the chosen pairs to the mapped prefixes of both datasets, in the
/// same order on each side, and returns the new datasets with `K` increased.
pub fn promote_matches(
    a: &Dataset,
    b: &Dataset,
    proposals: &[MatchProposal],
    policy: PromotionPolicy,
    require_accepted: bool,
) -> Result<(Dataset, Dataset, Vec<MatchProposal>)> {
    let chosen = select_promotions(proposals, policy, require_accepted)?;
    let (a2, b2) = extend_mapped(a, b, &chosen.iter().map(|p| (p.feature_a.clone(), p.feature_b.clone())).collect::<Vec<_>>())?;
    Ok((a2, b2, chosen))
}

/// Moves the given `(A feature, B feature)` pairs right after the current
/// mapped prefix of each dataset.
pub fn extend_mapped(a: &Dataset, b: &Dataset, pairs: &[(String, String)]) -> Result<(Dataset, Dataset)> {
    let extend = |ds: &Dataset, names: Vec<&str>| -> Result<Dataset> {
        let k = ds.mapped_count();
        let mut seen = HashSet::new();
        let mut order: Vec<usize> = (0..k).collect();
        for name in &names {
            let j = ds.index_of(name).ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
            if j < k {
                return Err(Error::Conflict(format!("`{name}` is already mapped in `{}`", ds.name())));
            }
            if !seen.insert(j) {
                return Err(Error::DuplicateFeature(name.to_string()));
            }
            order.push(j);
        }
        order.extend((k..ds.n_features()).filter(|j| !seen.contains(j)));
        let mut out = ds.select_columns(&order);
        // certainty weights of promoted columns stay at their stored values
        out = out.with_mapped_count(k + names.len())?;
        Ok(out)
    };
    let a2 = extend(a, pairs.iter().map(|p| p.0.as_str()).collect())?;
    let b2 = extend(b, pairs.iter().map(|p| p.1.as_str()).collect())?;
    Ok((a2, b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{gale_shapley, Direction};
    use crate::rng::rng_for;
    use crate::synthgen::{build_scenario, make_covariance, CovarianceSpec, GeneratorFamily, Population, ScenarioConfig};

    fn gaussian_pair(n: usize, seed: u64) -> (Dataset, Dataset) {
        let cov = make_covariance(&CovarianceSpec { dim: 20, factor_dim: 10, seed }).unwrap();
        let pop = Population::new(GeneratorFamily::Gaussian, &cov, (10.0, 20.0), seed).unwrap();
        (
            pop.sample(n, "a", &mut rng_for(seed, &[1])).unwrap(),
            pop.sample(n, "b", &mut rng_for(seed, &[2])).unwrap(),
        )
    }

    #[test]
    fn copy_of_mapped_column_has_unit_entry() {
        let x = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let y = vec![2.0, 1.0, 2.0, 0.0, 3.0];
        let ds = Dataset::from_columns("d", vec![("m0".into(), x.clone()), ("m1".into(), y), ("u".into(), x)])
            .unwrap()
            .with_mapped_count(2)
            .unwrap();
        let fp = fingerprints(&ds).unwrap();
        assert_eq!(fp.len(), 1);
        assert!((fp[0].values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_mapped_is_error() {
        let ds = Dataset::from_columns("d", vec![("a".into(), vec![1.0, 2.0, 3.0])]).unwrap();
        assert!(fingerprints(&ds).is_err());
    }

    #[test]
    fn independent_data_gives_small_fingerprints() {
        let cov = Array2::eye(10);
        let pop = Population::new(GeneratorFamily::IndependentGaussian, &cov, (10.0, 20.0), 0).unwrap();
        let n = 10_000;
        let ds = pop.sample(n, "a", &mut rng_for(0, &[3])).unwrap().with_mapped_count(4).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for f in fingerprints(&ds).unwrap() {
            assert!(f.values.iter().all(|v| v.abs() < bound), "{:?}", f.values);
        }
    }

    #[test]
    fn one_mapped_feature_reduces_to_sign_agreement() {
        let mk = |name: &str, v: f64| Fingerprint { feature: name.into(), values: Array1::from(vec![v]), degenerate: vec![false] };
        let s = kmf_similarity("A", &[mk("a0", 0.3), mk("a1", -0.2)], "B", &[mk("b0", 0.9), mk("b1", -0.7)]).unwrap();
        assert_eq!(s.values, ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn zero_fingerprints_are_degenerate() {
        let z = Fingerprint { feature: "z".into(), values: Array1::zeros(3), degenerate: vec![true; 3] };
        let s = kmf_similarity("A", std::slice::from_ref(&z), "B", std::slice::from_ref(&z)).unwrap();
        assert_eq!(s.values[[0, 0]], 0.0);
        assert!(s.degenerate[[0, 0]]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = Fingerprint { feature: "a".into(), values: Array1::zeros(2), degenerate: vec![false; 2] };
        let b = Fingerprint { feature: "b".into(), values: Array1::zeros(3), degenerate: vec![false; 3] };
        assert!(kmf_similarity("A", &[a], "B", &[b]).is_err());
    }

    #[test]
    fn self_match_recovers_identity() {
        let (a, _) = gaussian_pair(2000, 1);
        let a = a.with_mapped_count(6).unwrap();
        let fp = fingerprints(&a).unwrap();
        let s = kmf_similarity("A", &fp, "A", &fp).unwrap();
        let argmax = s.row_argmax();
        assert!(argmax.iter().enumerate().all(|(i, j)| *j == Some(i)));
    }

    #[test]
    fn similarity_transpose_symmetry_and_affine_invariance() {
        let (a, b) = gaussian_pair(500, 2);
        let a = a.with_mapped_count(5).unwrap();
        let b = b.with_mapped_count(5).unwrap();
        let fa = fingerprints(&a).unwrap();
        let fb = fingerprints(&b).unwrap();
        let ab = kmf_similarity("A", &fa, "B", &fb).unwrap();
        let ba = kmf_similarity("B", &fb, "A", &fa).unwrap();
        assert_eq!(ab.values, ba.transpose().values);

        let mut scaled = a.clone();
        scaled.map_column(7, |v| 3.5 * v - 12.0);
        let fs = fingerprints(&scaled).unwrap();
        let s2 = kmf_similarity("A", &fs, "B", &fb).unwrap();
        for (x, y) in ab.values.iter().zip(s2.values.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn permuted_gaussian_recovered() {
        let (a, b) = gaussian_pair(10_000, 3);
        let sc = build_scenario(&a, &b, &ScenarioConfig::permutation(8), 3, 0, 0).unwrap();
        let s = kmf_similarity("A", &fingerprints(&sc.a).unwrap(), "B", &fingerprints(&sc.b).unwrap()).unwrap();
        let props = gale_shapley(&s, Direction::AApplies).unwrap();
        let gold: HashSet<(String, String)> = sc.spec.gold_map.iter().cloned().collect();
        let hits = props.iter().filter(|p| gold.contains(&(p.feature_a.clone(), p.feature_b.clone()))).count();
        assert!(hits as f64 / gold.len() as f64 >= 0.85, "{hits}/{}", gold.len());
    }

    #[test]
    fn translation_correlates_with_true_partner() {
        let (a, b) = gaussian_pair(5000, 4);
        let sc = build_scenario(&a, &b, &ScenarioConfig::permutation(8), 4, 0, 0).unwrap();
        let t = kmf_translate(&sc.a, &fingerprints(&sc.b).unwrap()).unwrap();
        for (fa, fb) in &sc.spec.gold_map {
            let r = pearson(sc.a.column_by_name(fa).unwrap(), t.column_by_name(fb).unwrap()).unwrap().value;
            assert!(r > 0.3, "{fa}->{fb}: {r}");
        }
    }

    fn props() -> Vec<MatchProposal> {
        let mut v = vec![
            MatchProposal::new("u0", "v0", 0.99),
            MatchProposal::new("u1", "v1", 0.96),
            MatchProposal::new("u2", "v2", 0.7),
            MatchProposal::new("u3", "v3", 0.2),
        ];
        v[2].accepted = false;
        v
    }

    fn named(prefix: &str) -> Dataset {
        let cols = ["m", &format!("{prefix}0"), &format!("{prefix}1"), &format!("{prefix}2"), &format!("{prefix}3")]
            .iter()
            .enumerate()
            .map(|(j, n)| (n.to_string(), (0..6).map(|i| ((i * (j + 2)) % 7) as f64).collect()))
            .collect();
        Dataset::from_columns("d", cols).unwrap().with_mapped_count(1).unwrap()
    }

    #[test]
    fn promotion_policies() {
        let p = props();
        assert_eq!(select_promotions(&p, PromotionPolicy::TopFraction(1.0), false).unwrap().len(), 4);
        assert!(select_promotions(&p, PromotionPolicy::Threshold(1.01), false).unwrap().is_empty());
        let hi = select_promotions(&p, PromotionPolicy::Threshold(0.95), false).unwrap();
        assert_eq!(hi.iter().map(|p| p.feature_a.as_str()).collect::<Vec<_>>(), vec!["u0", "u1"]);
        assert_eq!(select_promotions(&p, PromotionPolicy::Threshold(0.5), true).unwrap().len(), 2);
        assert_eq!(select_promotions(&p, PromotionPolicy::TopFraction(0.5), false).unwrap().len(), 2);
        assert_eq!(select_promotions(&p, PromotionPolicy::TopFraction(0.3), false).unwrap().len(), 2);
    }

    #[test]
    fn promote_extends_both_prefixes() {
        let (a, b) = (named("u"), named("v"));
        let (a2, b2, chosen) = promote_matches(&a, &b, &props(), PromotionPolicy::Threshold(0.9), true).unwrap();
        assert_eq!(chosen.len(), 2);
        assert_eq!(a2.mapped_names(), vec!["m", "u0", "u1"]);
        assert_eq!(b2.mapped_names(), vec!["m", "v0", "v1"]);
        assert_eq!(a2.n_features(), 5);
    }

    #[test]
    fn promoting_mapped_feature_is_error() {
        let (a, b) = (named("u"), named("v"));
        let bad = vec![MatchProposal::new("m", "v0", 0.99)];
        assert!(promote_matches(&a, &b, &bad, PromotionPolicy::Threshold(0.5), false).is_err());
    }

    #[test]
    fn fingerprint_csv() {
        let f = Fingerprint { feature: "u".into(), values: Array1::from(vec![0.5, -0.25]), degenerate: vec![false; 2] };
        let mut buf = Vec::new();
        write_fingerprints_csv(&[f], &["m0".into(), "m1".into()], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "feature,m0,m1\nu,0.5,-0.25\n");
    }
}
