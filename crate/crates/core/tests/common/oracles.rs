//! Brute-force and closed-form cross-checks of the core numerical routines,
//! shared by the oracle tests and the acceptance run.

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::StandardNormal;

use schemamatch::chimeric::{ChimericConfig, ChimericModel};
use schemamatch::dataset::Dataset;
use schemamatch::matcher::{gale_shapley, Direction, MatchProposal};
use schemamatch::neural::{Activation, MlpParams, MlpSpec, Mode};
use schemamatch::rng::{rng_for, Rng};
use schemamatch::stats::{by_stepdown, cosine, pearson, wilcoxon_ranksum, DependenceMeasure, SimilarityMatrix};

// ---------- stable matching ----------

fn random_sim(rows: usize, cols: usize, rng: &mut Rng) -> SimilarityMatrix {
    let values = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0));
    SimilarityMatrix::new(
        "A",
        (0..rows).map(|i| format!("a{i}")).collect(),
        "B",
        (0..cols).map(|j| format!("b{j}")).collect(),
        values,
        None,
        DependenceMeasure::Pearson,
    )
    .unwrap()
}

/// Every partial injection from `n` applicants into `m` reviewers.
fn all_matchings(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn go(i: usize, n: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, n, m, used, cur, out);
        cur.pop();
        for r in 0..m {
            if !used[r] {
                used[r] = true;
                cur.push(Some(r));
                go(i + 1, n, m, used, cur, out);
                cur.pop();
                used[r] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

/// `score[a][r]`: how much applicant `a` likes reviewer `r`, and symmetric
/// for reviewers. Everyone is acceptable to everyone.
fn is_stable(matching: &[Option<usize>], score: &[Vec<f64>], m: usize) -> bool {
    let mut holder = vec![None; m];
    for (a, r) in matching.iter().enumerate() {
        if let Some(r) = r {
            holder[*r] = Some(a);
        }
    }
    for (a, cur) in matching.iter().enumerate() {
        for r in 0..m {
            let a_wants = match cur {
                None => true,
                Some(c) => score[a][r] > score[a][*c],
            };
            let r_wants = match holder[r] {
                None => true,
                Some(h) => score[a][r] > score[h][r],
            };
            if a_wants && r_wants {
                return false;
            }
        }
    }
    true
}

pub fn gale_shapley_vs_enumeration() -> Result<String, String> {
    let mut rng = rng_for(7, &[1]);
    for case in 0..200 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let sim = random_sim(rows, cols, &mut rng);
        for dir in [Direction::AApplies, Direction::BApplies] {
            let (n, m) = match dir {
                Direction::AApplies => (rows, cols),
                Direction::BApplies => (cols, rows),
            };
            let score: Vec<Vec<f64>> = (0..n)
                .map(|a| {
                    (0..m)
                        .map(|r| match dir {
                            Direction::AApplies => sim.values[[a, r]],
                            Direction::BApplies => sim.values[[r, a]],
                        })
                        .collect()
                })
                .collect();
            let props: Vec<MatchProposal> = gale_shapley(&sim, dir).unwrap();
            let mut got = vec![None; n];
            for p in &props {
                let i: usize = p.feature_a[1..].parse().unwrap();
                let j: usize = p.feature_b[1..].parse().unwrap();
                match dir {
                    Direction::AApplies => got[i] = Some(j),
                    Direction::BApplies => got[j] = Some(i),
                }
            }
            if !is_stable(&got, &score, m) {
                return Err(format!("case {case}: unstable {got:?}"));
            }
            let stable: Vec<Vec<Option<usize>>> = all_matchings(n, m).into_iter().filter(|x| is_stable(x, &score, m)).collect();
            for a in 0..n {
                let value = |x: &Option<usize>| x.map_or(f64::NEG_INFINITY, |r| score[a][r]);
                let best = stable.iter().map(|s| value(&s[a])).fold(f64::NEG_INFINITY, f64::max);
                if value(&got[a]) != best {
                    return Err(format!("case {case}: applicant {a} not at its best stable partner"));
                }
            }
        }
    }
    Ok("200 instances, both directions".into())
}

// ---------- BY ----------

fn by_oracle(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let c: f64 = (1..=m).map(|j| 1.0 / j as f64).sum();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut threshold = f64::NEG_INFINITY;
    for (k, &v) in sorted.iter().enumerate() {
        if v <= (k + 1) as f64 * q / (m as f64 * c) {
            threshold = v;
        }
    }
    p.iter().map(|&v| v <= threshold).collect()
}

pub fn by_vs_direct_threshold() -> Result<String, String> {
    let mut rng = rng_for(7, &[2]);
    for case in 0..500 {
        let m = rng.random_range(1..=40);
        let coarse = case % 3 == 0;
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let v: f64 = if rng.random_bool(0.4) { rng.random_range(0.0..0.01) } else { rng.random_range(0.0..1.0) };
                if coarse {
                    (v * 200.0).round() / 200.0
                } else {
                    v
                }
            })
            .collect();
        let q = [0.01, 0.05, 0.1, 0.2][case % 4];
        if by_stepdown(&p, q).map_err(|e| e.to_string())? != by_oracle(&p, q) {
            return Err(format!("case {case}: {p:?}"));
        }
    }
    Ok("500 p-vectors".into())
}

// ---------- gradients ----------

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Largest relative error between backprop and central differences over 20
/// random networks.
pub fn mlp_gradient_error() -> f64 {
    let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
    let mut worst: f64 = 0.0;
    for net in 0..20u64 {
        let mut rng = rng_for(net, &[3]);
        let sizes = [rng.random_range(1..6), rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..5)];
        let activations = [acts[rng.random_range(0..3)], acts[rng.random_range(0..3)], acts[rng.random_range(0..3)]];
        let spec = MlpSpec { sizes, activations, dropout_sites: [true, true], dropout: 0.0 };
        let mut params = MlpParams::new(spec, &mut rng).unwrap();
        for l in 0..3 {
            let layer = params.layer_mut(l);
            layer.b.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal) * 0.3);
        }
        params.set_mode(Mode::Eval);
        let m = rng.random_range(1..6);
        let x = Array2::from_shape_simple_fn((m, sizes[0]), || rng.sample::<f64, _>(StandardNormal));
        let weights = Array2::from_shape_simple_fn((m, sizes[3]), || rng.sample::<f64, _>(StandardNormal));
        let loss = |p: &MlpParams, x: &Array2<f64>| (p.predict(x.view()).unwrap() * &weights).sum();

        let (_, cache) = params.forward(x.view(), &mut rng).unwrap();
        let (grads, grad_x) = params.backward(&cache, weights.view()).unwrap();
        let h = 1e-5;
        for l in 0..3 {
            let (rows, cols) = params.layers()[l].w.dim();
            for i in 0..rows {
                for j in 0..cols {
                    let mut p = params.clone();
                    p.layer_mut(l).w[[i, j]] += h;
                    let up = loss(&p, &x);
                    p.layer_mut(l).w[[i, j]] -= 2.0 * h;
                    let down = loss(&p, &x);
                    worst = worst.max(rel_err(grads.w[l][[i, j]], (up - down) / (2.0 * h)));
                }
            }
            for j in 0..cols {
                let mut p = params.clone();
                p.layer_mut(l).b[j] += h;
                let up = loss(&p, &x);
                p.layer_mut(l).b[j] -= 2.0 * h;
                let down = loss(&p, &x);
                worst = worst.max(rel_err(grads.b[l][j], (up - down) / (2.0 * h)));
            }
        }
        for i in 0..m {
            for j in 0..sizes[0] {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let up = loss(&params, &xp);
                xp[[i, j]] -= 2.0 * h;
                let down = loss(&params, &xp);
                worst = worst.max(rel_err(grad_x[[i, j]], (up - down) / (2.0 * h)));
            }
        }
    }
    worst
}

fn toy(name: &str, n: usize, p: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, &[4]);
    let z = Array2::from_shape_simple_fn((n, 2), || rng.sample::<f64, _>(StandardNormal));
    let cols = (0..p)
        .map(|j| {
            let w = (j as f64 + 1.0).sin();
            let col: Vec<f64> = (0..n).map(|i| z[[i, 0]] * w + z[[i, 1]] * (1.0 - w) + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            (if j < k { format!("m{j}") } else { format!("{name}{j}") }, col)
        })
        .collect();
    Dataset::from_columns(name, cols).unwrap().with_mapped_count(k).unwrap()
}

fn net_ref(m: &ChimericModel, i: usize) -> &MlpParams {
    [&m.f_a, &m.g_a, &m.f_b, &m.g_b][i]
}

fn net_mut(m: &mut ChimericModel, i: usize) -> &mut MlpParams {
    match i {
        0 => &mut m.f_a,
        1 => &mut m.g_a,
        2 => &mut m.f_b,
        _ => &mut m.g_b,
    }
}

/// Same for the full chimeric loss with every term switched on.
pub fn chimeric_gradient_error() -> f64 {
    let a = toy("a", 12, 5, 2, 1);
    let b = toy("b", 12, 4, 2, 2);
    let cfg = ChimericConfig { latent_dim: 2, hidden: [4, 3], dropout: 0.0, w_ortho: 0.3, ..Default::default() };
    let mut model = ChimericModel::init(&a, &b, &cfg).unwrap();
    for net in [&mut model.f_a, &mut model.g_a, &mut model.f_b, &mut model.g_b] {
        net.set_mode(Mode::Eval);
    }
    let mut rng = rng_for(0, &[5]);
    let (_, grads) = model.loss_and_gradients(a.values(), b.values(), &mut rng).unwrap();
    let total = |m: &ChimericModel| m.loss_and_gradients(a.values(), b.values(), &mut rng_for(0, &[5])).unwrap().0.total;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (net, g) in grads.iter().enumerate() {
        for l in 0..3 {
            let dims = net_ref(&model, net).layers()[l].w.dim();
            for i in 0..dims.0 {
                for j in 0..dims.1 {
                    let mut up = model.clone();
                    net_mut(&mut up, net).layer_mut(l).w[[i, j]] += h;
                    let mut down = model.clone();
                    net_mut(&mut down, net).layer_mut(l).w[[i, j]] -= h;
                    let fd = (total(&up) - total(&down)) / (2.0 * h);
                    worst = worst.max(rel_err(g.w[l][[i, j]], fd));
                }
            }
        }
    }
    worst
}

// ---------- similarity ----------

/// Largest deviation of pearson and cosine from their textbook formulas.
pub fn similarity_error() -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = rng_for(7, &[6]);
    for _ in 0..200 {
        let n = rng.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random_range(-3.0..3.0)).collect();
        let nf = n as f64;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let r = (nf * sxy - sx * sy) / ((nf * sxx - sx * sx).sqrt() * (nf * syy - sy * sy).sqrt());
        let got = pearson(Array1::from(x.clone()).view(), Array1::from(y.clone()).view()).unwrap();
        worst = worst.max((got.value - r).abs());
        let c = sxy / (sxx.sqrt() * syy.sqrt());
        let got = cosine(Array1::from(x).view(), Array1::from(y).view()).unwrap();
        worst = worst.max((got.value - c).abs());
    }
    worst
}

// ---------- rank sum ----------

fn normal_upper_tail(z: f64) -> f64 {
    // Simpson's rule on the density from |z| to 12.
    let (a, b, steps) = (z.abs(), 12.0, 20_000);
    let h = (b - a) / steps as f64;
    let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..steps {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

/// Largest deviations of (U, z, p) from pair counting and exact permutation
/// moments at sample sizes up to 8.
pub fn ranksum_error() -> (f64, f64) {
    let (mut u_err, mut zp_err): (f64, f64) = (0.0, 0.0);
    let mut rng = rng_for(7, &[7]);
    for _ in 0..100 {
        let na = rng.random_range(3..=8);
        let nb = rng.random_range(3..=8);
        let draw = |rng: &mut Rng| f64::from(rng.random_range(0..6)) + if rng.random_bool(0.5) { 0.25 } else { 0.0 };
        let a: Vec<f64> = (0..na).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng)).collect();

        // U by pair counting.
        let u: f64 = a.iter().flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 })).sum();
        // Exact permutation moments of U over all relabelings of the pooled sample.
        let pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        let n = pooled.len();
        let us: Vec<f64> = subsets(n, na)
            .iter()
            .map(|s| {
                let (mut sa, mut sb) = (Vec::new(), Vec::new());
                for (i, &v) in pooled.iter().enumerate() {
                    if s.contains(&i) {
                        sa.push(v)
                    } else {
                        sb.push(v)
                    }
                }
                sa.iter().flat_map(|x| sb.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 })).sum()
            })
            .collect();
        let mean = us.iter().sum::<f64>() / us.len() as f64;
        let var = us.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / us.len() as f64;

        let got = wilcoxon_ranksum(&a, &b).unwrap();
        u_err = u_err.max((got.statistic - u).abs());
        if var == 0.0 {
            zp_err = zp_err.max((got.p_value - 1.0).abs());
            continue;
        }
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let p = (2.0 * normal_upper_tail(z)).min(1.0);
        zp_err = zp_err.max((got.z.abs() - z).abs()).max((got.p_value - p).abs());
    }
    (u_err, zp_err)
}
