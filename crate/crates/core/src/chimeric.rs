//! Paired autoencoders with a shared latent space.
//!
//! Each database gets an encoder `f` and a decoder `g`. Besides plain
//! reconstruction, the known-mapped columns of the chimeric output
//! `g_B(f_A(x_A))` are pulled toward their true values, rows are asked to
//! survive a round trip through the other database's format, and the latent
//! codes are nudged toward an orthonormal second moment. Once trained,
//! `g_B ∘ f_A` translates rows of A into B's columns, and correlating the
//! translation with A's own columns gives the chimeric dependence matrix.

use std::io::Write;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neural::{adam_step, Activation, AdamState, Checkpoint, Gradients, LrPlateau, MlpParams, MlpSpec, Mode};
use crate::rng::{rng_for, Rng};
use crate::stats::{mutual_information, pearson, DependenceMeasure, SimilarityMatrix, DEFAULT_MI_BINS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChimericConfig {
    pub latent_dim: usize,
    /// Encoder hidden sizes; decoders use them reversed.
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub hidden_activation: Activation,
    pub latent_activation: Activation,
    pub output_activation: Activation,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub w_cross: f64,
    pub w_cycle: f64,
    pub w_ortho: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub fdr: f64,
    pub seed: u64,
}

impl Default for ChimericConfig {
    fn default() -> Self {
        Self {
            latent_dim: 5,
            hidden: [80, 40],
            dropout: 0.5,
            hidden_activation: Activation::Tanh,
            latent_activation: Activation::Identity,
            output_activation: Activation::Identity,
            batch_size: 64,
            epochs: 40,
            learning_rate: 1e-2,
            weight_decay: 1e-5,
            w_cross: 1.0,
            w_cycle: 1.0,
            w_ortho: 0.01,
            plateau_factor: 0.5,
            plateau_patience: 5,
            fdr: 0.05,
            seed: 0,
        }
    }
}

impl ChimericConfig {
    fn validate(&self, p_a: usize, p_b: usize) -> Result<()> {
        if self.latent_dim == 0 || self.latent_dim >= p_a.min(p_b) {
            return Err(Error::invalid(format!(
                "latent dimension {} must be positive and below min(p_A, p_B) = {}",
                self.latent_dim,
                p_a.min(p_b)
            )));
        }
        for (name, w) in [("w_cross", self.w_cross), ("w_cycle", self.w_cycle), ("w_ortho", self.w_ortho)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a nonnegative number, got {w}")));
            }
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        Ok(())
    }

    fn encoder(&self, input: usize) -> MlpSpec {
        MlpSpec::encoder(input, self.hidden, self.latent_dim, self.hidden_activation, self.latent_activation, self.dropout)
    }

    fn decoder(&self, output: usize) -> MlpSpec {
        MlpSpec::decoder(self.latent_dim, [self.hidden[1], self.hidden[0]], output, self.hidden_activation, self.output_activation, self.dropout)
    }
}

/// Loss components of one batch (or the mean over an epoch).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ae_a: f64,
    pub ae_b: f64,
    pub ce_a: f64,
    pub ce_b: f64,
    pub cy_a: f64,
    pub cy_b: f64,
    pub ortho_a: f64,
    pub ortho_b: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn finish(mut self, cfg: &ChimericConfig) -> Self {
        self.total = self.ae_a
            + self.ae_b
            + cfg.w_cross * (self.ce_a + self.ce_b)
            + cfg.w_cycle * (self.cy_a + self.cy_b)
            + cfg.w_ortho * (self.ortho_a + self.ortho_b);
        self
    }

    fn components(&self) -> [(&'static str, f64); 8] {
        [
            ("AE_A", self.ae_a),
            ("AE_B", self.ae_b),
            ("CE_A", self.ce_a),
            ("CE_B", self.ce_b),
            ("CY_A", self.cy_a),
            ("CY_B", self.cy_b),
            ("ortho", self.ortho_a + self.ortho_b),
            ("total", self.total),
        ]
    }

    fn accumulate(&mut self, o: &LossBreakdown, s: f64) {
        self.ae_a += s * o.ae_a;
        self.ae_b += s * o.ae_b;
        self.ce_a += s * o.ce_a;
        self.ce_b += s * o.ce_b;
        self.cy_a += s * o.cy_a;
        self.cy_b += s * o.cy_b;
        self.ortho_a += s * o.ortho_a;
        self.ortho_b += s * o.ortho_b;
        self.total += s * o.total;
    }
}

/// Which way a translation goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Translation {
    /// `g_B(f_A(x_A))`: rows of A in B's columns.
    AToB,
    /// `g_A(f_B(x_B))`: rows of B in A's columns.
    BToA,
}

#[derive(Clone, Debug)]
pub struct ChimericModel {
    pub f_a: MlpParams,
    pub g_a: MlpParams,
    pub f_b: MlpParams,
    pub g_b: MlpParams,
    pub config: ChimericConfig,
    pub features_a: Vec<String>,
    pub features_b: Vec<String>,
    pub mapped_count: usize,
    /// Certainty weights of the mapped columns.
    pub mapped_weights: Vec<f64>,
    /// Mean losses per epoch.
    pub trace: Vec<LossBreakdown>,
}

/// Per-network gradients in the order `f_A, g_A, f_B, g_B`.
pub type ModelGradients = [Gradients; 4];

fn mse(pred: &Array2<f64>, target: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let diff = pred - &target;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    (loss, diff * (2.0 / count))
}

/// Weighted mean squared error on the first `k` columns; gradient is zero on
/// the remaining columns.
fn cross_loss(pred: &Array2<f64>, target: ArrayView2<'_, f64>, weights: &[f64]) -> (f64, Array2<f64>) {
    let k = weights.len();
    let m = pred.nrows();
    let count = (m * k) as f64;
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for i in 0..m {
        for (c, &w) in weights.iter().enumerate() {
            let d = pred[[i, c]] - target[[i, c]];
            loss += w * d * d;
            grad[[i, c]] = 2.0 * w * d / count;
        }
    }
    (loss / count, grad)
}

/// `‖HᵀH/m − I‖_F` and its gradient with respect to `H`.
fn ortho_loss(h: &Array2<f64>) -> (f64, Array2<f64>) {
    let m = h.nrows() as f64;
    let l = h.ncols();
    let mut o = h.t().dot(h) / m;
    for d in 0..l {
        o[[d, d]] -= 1.0;
    }
    let norm = o.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, Array2::zeros(h.raw_dim()));
    }
    (norm, h.dot(&o) * (2.0 / (m * norm)))
}

struct Side<'a> {
    enc: &'a MlpParams,
    dec: &'a MlpParams,
    other_enc: &'a MlpParams,
    other_dec: &'a MlpParams,
}

struct SideOut {
    ae: f64,
    ce: f64,
    cy: f64,
    ortho: f64,
    /// Gradients for (enc, dec, other_enc, other_dec).
    grads: [Gradients; 4],
}

fn side_pass(side: &Side<'_>, x: ArrayView2<'_, f64>, weights: &[f64], cfg: &ChimericConfig, rng: &mut Rng) -> Result<SideOut> {
    let k = weights.len();
    let (h, c_enc) = side.enc.forward(x, rng)?;
    let (x_hat, c_dec) = side.dec.forward(h.view(), rng)?;
    let (z, c_odec) = side.other_dec.forward(h.view(), rng)?;
    let (h2, c_oenc) = side.other_enc.forward(z.view(), rng)?;
    let (x_cyc, c_dec2) = side.dec.forward(h2.view(), rng)?;

    let (ae, d_xhat) = mse(&x_hat, x);
    let (ce, d_z_ce) = cross_loss(&z, x.slice(s![.., ..k]), weights);
    let (cy, d_xcyc) = mse(&x_cyc, x);
    let (ortho, d_h_ortho) = ortho_loss(&h);

    let (mut g_dec, d_h2) = side.dec.backward(&c_dec2, (d_xcyc * cfg.w_cycle).view())?;
    let (g_oenc, d_z_cy) = side.other_enc.backward(&c_oenc, d_h2.view())?;
    let d_z = d_z_ce * cfg.w_cross + d_z_cy;
    let (g_odec, d_h_cross) = side.other_dec.backward(&c_odec, d_z.view())?;
    let (g_dec_ae, d_h_ae) = side.dec.backward(&c_dec, d_xhat.view())?;
    g_dec.add_assign(&g_dec_ae);
    let d_h = d_h_cross + d_h_ae + d_h_ortho * cfg.w_ortho;
    let (g_enc, _) = side.enc.backward(&c_enc, d_h.view())?;
    Ok(SideOut { ae, ce, cy, ortho, grads: [g_enc, g_dec, g_oenc, g_odec] })
}

/// Columns of `ds` in the model's order for one side, matched by name.
fn align<'a>(ds: &'a Dataset, names: &[String]) -> Result<std::borrow::Cow<'a, Dataset>> {
    if ds.n_features() != names.len() {
        return Err(Error::Shape(format!("dataset has {} columns, model expects {}", ds.n_features(), names.len())));
    }
    if ds.features().iter().zip(names).all(|(f, n)| &f.name == n) {
        return Ok(std::borrow::Cow::Borrowed(ds));
    }
    let order = names.iter().map(|n| ds.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone()))).collect::<Result<Vec<_>>>()?;
    Ok(std::borrow::Cow::Owned(ds.select_columns(&order)))
}

impl ChimericModel {
    /// Fresh networks for the given datasets; no training.
    pub fn init(a: &Dataset, b: &Dataset, cfg: &ChimericConfig) -> Result<Self> {
        let k = a.mapped_count();
        if k == 0 {
            return Err(Error::invalid("chimeric training needs at least one known-mapped feature"));
        }
        if b.mapped_count() != k {
            return Err(Error::invalid(format!("mapped counts differ: A has {k}, B has {}", b.mapped_count())));
        }
        let (pa, pb) = (a.n_features(), b.n_features());
        cfg.validate(pa, pb)?;
        let seed = cfg.seed;
        Ok(Self {
            f_a: MlpParams::new(cfg.encoder(pa), &mut rng_for(seed, &[0xF0, 1]))?,
            g_a: MlpParams::new(cfg.decoder(pa), &mut rng_for(seed, &[0xF0, 2]))?,
            f_b: MlpParams::new(cfg.encoder(pb), &mut rng_for(seed, &[0xF0, 3]))?,
            g_b: MlpParams::new(cfg.decoder(pb), &mut rng_for(seed, &[0xF0, 4]))?,
            config: cfg.clone(),
            features_a: a.feature_names(),
            features_b: b.feature_names(),
            mapped_count: k,
            mapped_weights: a.mapped_weights(),
            trace: Vec::new(),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.f_a.output_dim()
    }

    fn set_mode(&mut self, mode: Mode) {
        for net in [&mut self.f_a, &mut self.g_a, &mut self.f_b, &mut self.g_b] {
            net.set_mode(mode);
        }
    }

    /// Total loss of one pair of batches and its gradient for every network.
    pub fn loss_and_gradients(&self, xa: ArrayView2<'_, f64>, xb: ArrayView2<'_, f64>, rng: &mut Rng) -> Result<(LossBreakdown, ModelGradients)> {
        let cfg = &self.config;
        let w = &self.mapped_weights;
        let side_a = Side { enc: &self.f_a, dec: &self.g_a, other_enc: &self.f_b, other_dec: &self.g_b };
        let side_b = Side { enc: &self.f_b, dec: &self.g_b, other_enc: &self.f_a, other_dec: &self.g_a };
        let a = side_pass(&side_a, xa, w, cfg, rng)?;
        let b = side_pass(&side_b, xb, w, cfg, rng)?;
        let loss = LossBreakdown {
            ae_a: a.ae,
            ae_b: b.ae,
            ce_a: a.ce,
            ce_b: b.ce,
            cy_a: a.cy,
            cy_b: b.cy,
            ortho_a: a.ortho,
            ortho_b: b.ortho,
            total: 0.0,
        }
        .finish(cfg);
        let [a_fa, a_ga, a_fb, a_gb] = a.grads;
        let [b_fb, b_gb, b_fa, b_ga] = b.grads;
        let mut out = [a_fa, a_ga, a_fb, a_gb];
        out[0].add_assign(&b_fa);
        out[1].add_assign(&b_ga);
        out[2].add_assign(&b_fb);
        out[3].add_assign(&b_gb);
        Ok((loss, out))
    }

    /// Loss on full datasets with dropout off.
    pub fn evaluate_loss(&self, a: &Dataset, b: &Dataset) -> Result<LossBreakdown> {
        let mut m = self.clone();
        m.set_mode(Mode::Eval);
        let (loss, _) = m.loss_and_gradients(a.values(), b.values(), &mut rng_for(0, &[]))?;
        Ok(loss)
    }

    /// Translates rows of one database into the other's columns with dropout
    /// off. Columns are named after the target database's features.
    pub fn translate(&self, ds: &Dataset, direction: Translation) -> Result<Dataset> {
        let (enc, dec, names) = match direction {
            Translation::AToB => (&self.f_a, &self.g_b, &self.features_b),
            Translation::BToA => (&self.f_b, &self.g_a, &self.features_a),
        };
        let source = match direction {
            Translation::AToB => &self.features_a,
            Translation::BToA => &self.features_b,
        };
        let ds = align(ds, source)?;
        let z = dec.predict(enc.predict(ds.values())?.view())?;
        let cols = names.iter().cloned().zip(z.columns().into_iter().map(|c| c.to_vec())).collect();
        Dataset::from_columns(format!("{}->", ds.name()), cols)
    }

    /// Latent codes with dropout off.
    pub fn encode(&self, ds: &Dataset, side: Translation) -> Result<Array2<f64>> {
        let (enc, source) = match side {
            Translation::AToB => (&self.f_a, &self.features_a),
            Translation::BToA => (&self.f_b, &self.features_b),
        };
        enc.predict(align(ds, source)?.values())
    }

    /// Predicted values of B's feature `feature_b` for the rows of A.
    pub fn reconstruct_unshared(&self, a: &Dataset, feature_b: &str) -> Result<Vec<f64>> {
        let j = self
            .features_b
            .iter()
            .position(|f| f == feature_b)
            .ok_or_else(|| Error::UnknownFeature(feature_b.to_string()))?;
        let z = self.translate(a, Translation::AToB)?;
        Ok(z.column(j).to_vec())
    }

    /// Loss trace in long format: `epoch,component,value`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "component", "value"])?;
        for (e, l) in self.trace.iter().enumerate() {
            for (name, v) in l.components() {
                w.write_record([(e + 1).to_string(), name.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            config: self.config.clone(),
            features_a: self.features_a.clone(),
            features_b: self.features_b.clone(),
            mapped_count: self.mapped_count,
            mapped_weights: self.mapped_weights.clone(),
            f_a: self.f_a.to_checkpoint(),
            g_a: self.g_a.to_checkpoint(),
            f_b: self.f_b.to_checkpoint(),
            g_b: self.g_b.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        let mut m = Self {
            f_a: MlpParams::from_checkpoint(&ck.f_a)?,
            g_a: MlpParams::from_checkpoint(&ck.g_a)?,
            f_b: MlpParams::from_checkpoint(&ck.f_b)?,
            g_b: MlpParams::from_checkpoint(&ck.g_b)?,
            config: ck.config.clone(),
            features_a: ck.features_a.clone(),
            features_b: ck.features_b.clone(),
            mapped_count: ck.mapped_count,
            mapped_weights: ck.mapped_weights.clone(),
            trace: Vec::new(),
        };
        let l = m.f_a.output_dim();
        let ok = m.f_b.output_dim() == l
            && m.g_a.input_dim() == l
            && m.g_b.input_dim() == l
            && m.f_a.input_dim() == m.features_a.len()
            && m.g_a.output_dim() == m.features_a.len()
            && m.f_b.input_dim() == m.features_b.len()
            && m.g_b.output_dim() == m.features_b.len()
            && m.mapped_weights.len() == m.mapped_count;
        if !ok {
            return Err(Error::Shape("checkpoint networks do not fit together".into()));
        }
        m.set_mode(Mode::Eval);
        Ok(m)
    }
}

/// Everything needed to restore a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub config: ChimericConfig,
    pub features_a: Vec<String>,
    pub features_b: Vec<String>,
    pub mapped_count: usize,
    pub mapped_weights: Vec<f64>,
    pub f_a: Checkpoint,
    pub g_a: Checkpoint,
    pub f_b: Checkpoint,
    pub g_b: Checkpoint,
}

/// Cycles through a shuffled row order, reshuffling when exhausted.
struct BatchStream {
    order: Vec<usize>,
    pos: usize,
}

impl BatchStream {
    fn new(n: usize, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order, pos: 0 }
    }

    fn next(&mut self, size: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size.min(self.order.len()) {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            let take = (size - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

fn gather(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Trains the four networks jointly. Both datasets must be preprocessed and
/// share the same mapped prefix.
pub fn train(a: &Dataset, b: &Dataset, cfg: &ChimericConfig) -> Result<ChimericModel> {
    let mut model = ChimericModel::init(a, b, cfg)?;
    let mut opt: Vec<AdamState> = [&model.f_a, &model.g_a, &model.f_b, &model.g_b]
        .iter()
        .map(|p| AdamState::new(p, cfg.learning_rate, cfg.weight_decay))
        .collect();
    let mut sched = LrPlateau::new(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience)?;
    let mut batch_rng = rng_for(cfg.seed, &[0xBA7C]);
    let mut drop_rng = rng_for(cfg.seed, &[0xD209]);
    let mut stream_a = BatchStream::new(a.n_rows(), &mut batch_rng);
    let mut stream_b = BatchStream::new(b.n_rows(), &mut batch_rng);
    let steps = a.n_rows().max(b.n_rows()).div_ceil(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut mean = LossBreakdown::default();
        for _ in 0..steps {
            let xa = gather(a.values(), &stream_a.next(cfg.batch_size, &mut batch_rng));
            let xb = gather(b.values(), &stream_b.next(cfg.batch_size, &mut batch_rng));
            let (loss, grads) = model.loss_and_gradients(xa.view(), xb.view(), &mut drop_rng)?;
            if let Some((name, _)) = loss.components().iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Diverged { epoch: epoch + 1, component: name.to_string() });
            }
            mean.accumulate(&loss, 1.0 / steps as f64);
            let [g_fa, g_ga, g_fb, g_gb] = grads;
            adam_step(&mut model.f_a, &g_fa, &mut opt[0])?;
            adam_step(&mut model.g_a, &g_ga, &mut opt[1])?;
            adam_step(&mut model.f_b, &g_fb, &mut opt[2])?;
            adam_step(&mut model.g_b, &g_gb, &mut opt[3])?;
        }
        log::debug!("epoch {} loss {:.5}", epoch + 1, mean.total);
        model.trace.push(mean);
        let lr = sched.observe(mean.total);
        opt.iter_mut().for_each(|o| o.lr = lr);
    }
    model.set_mode(Mode::Eval);
    Ok(model)
}

/// Dependence between every column of `ds` (rows) and every column of the
/// translated matrix `z` (columns).
pub fn chimeric_dependence(ds: &Dataset, z: &Dataset, measure: DependenceMeasure) -> Result<SimilarityMatrix> {
    if ds.n_rows() != z.n_rows() {
        return Err(Error::LengthMismatch { left: ds.n_rows(), right: z.n_rows() });
    }
    let (p, q) = (ds.n_features(), z.n_features());
    let mut values = Array2::zeros((p, q));
    let mut degenerate = Array2::from_elem((p, q), false);
    for i in 0..p {
        for j in 0..q {
            let d = match measure {
                DependenceMeasure::Pearson => pearson(ds.column(i), z.column(j))?,
                DependenceMeasure::MutualInformation => mutual_information(ds.column(i), z.column(j), DEFAULT_MI_BINS)?,
                DependenceMeasure::Cosine => crate::stats::cosine(ds.column(i), z.column(j))?,
            };
            values[[i, j]] = d.value;
            degenerate[[i, j]] = d.degenerate;
        }
    }
    SimilarityMatrix::new(ds.name(), ds.feature_names(), z.name(), z.feature_names(), values, Some(degenerate), measure)
}
