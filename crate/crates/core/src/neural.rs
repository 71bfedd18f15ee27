//! A small dense network engine: fixed two-hidden-layer perceptrons with
//! manual backpropagation, inverted Bernoulli dropout, Adam with L2 weight
//! decay and a reduce-on-plateau learning-rate schedule.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Affine map `x W + b` followed by an activation. `w` is `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

/// Architecture of an [`MlpParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// `[in, h1, h2, out]`.
    pub sizes: [usize; 4],
    /// Activations of the three layers.
    pub activations: [Activation; 3],
    /// Dropout after hidden layer 1 and after hidden layer 2.
    pub dropout_sites: [bool; 2],
    pub dropout: f64,
}

impl MlpSpec {
    /// Encoder shape: dropout after the second hidden layer.
    pub fn encoder(input: usize, hidden: [usize; 2], latent: usize, hidden_act: Activation, out_act: Activation, dropout: f64) -> Self {
        Self {
            sizes: [input, hidden[0], hidden[1], latent],
            activations: [hidden_act, hidden_act, out_act],
            dropout_sites: [false, true],
            dropout,
        }
    }

    /// Decoder shape: dropout after the first hidden layer.
    pub fn decoder(latent: usize, hidden: [usize; 2], output: usize, hidden_act: Activation, out_act: Activation, dropout: f64) -> Self {
        Self {
            sizes: [latent, hidden[0], hidden[1], output],
            activations: [hidden_act, hidden_act, out_act],
            dropout_sites: [true, false],
            dropout,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive, got {:?}", self.sizes)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Weights of a two-hidden-layer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    layers: Vec<Layer>,
    mode: Mode,
    version: u64,
}

/// Activations kept by [`MlpParams::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    version: u64,
    /// Input of each layer, after dropout.
    inputs: Vec<Array2<f64>>,
    /// Output of each layer after activation, before dropout.
    outputs: Vec<Array2<f64>>,
    /// Scaled dropout masks applied after layers 0 and 1.
    masks: [Option<Array2<f64>>; 2],
}

/// Parameter gradients, shaped like the layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            w: params.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: params.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.w.iter_mut().for_each(|w| *w *= s);
        self.b.iter_mut().for_each(|b| *b *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.w
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.b.iter().flat_map(|b| b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn shapes_match(&self, params: &MlpParams) -> bool {
        self.w.len() == params.layers.len()
            && params.layers.iter().zip(&self.w).all(|(l, w)| l.w.dim() == w.dim())
            && params.layers.iter().zip(&self.b).all(|(l, b)| l.b.dim() == b.dim())
    }
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases, training mode.
    pub fn new(spec: MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layers = (0..3)
            .map(|l| {
                let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit)),
                    b: Array1::zeros(fan_out),
                    activation: spec.activations[l],
                }
            })
            .collect();
        Ok(Self { spec, layers, mode: Mode::Train, version: 0 })
    }

    /// Builds from explicit layers; shapes must chain.
    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != 3 {
            return Err(Error::Shape(format!("expected 3 layers, got {}", layers.len())));
        }
        for (l, layer) in layers.iter().enumerate() {
            let want = (spec.sizes[l], spec.sizes[l + 1]);
            if layer.w.dim() != want || layer.b.len() != want.1 {
                return Err(Error::Shape(format!(
                    "layer {l}: weights {:?}, bias {} but sizes say {want:?}",
                    layer.w.dim(),
                    layer.b.len()
                )));
            }
            if layer.activation != spec.activations[l] {
                return Err(Error::invalid(format!("layer {l} activation disagrees with spec")));
            }
        }
        Ok(Self { spec, layers, mode: Mode::Train, version: 0 })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.spec.sizes[3]
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Bumped on every parameter change; caches from older versions are
    /// rejected by [`MlpParams::backward`].
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access to a layer. Invalidates outstanding caches.
    pub fn layer_mut(&mut self, l: usize) -> &mut Layer {
        self.version += 1;
        &mut self.layers[l]
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("batch has {} columns, network expects {}", x.ncols(), self.input_dim())));
        }
        Ok(())
    }

    /// Forward pass keeping what backward needs. Dropout masks are drawn from
    /// `rng` in training mode only.
    pub fn forward(&self, x: ArrayView2<'_, f64>, rng: &mut Rng) -> Result<(Array2<f64>, Cache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(3);
        let mut outputs = Vec::with_capacity(3);
        let mut masks = [None, None];
        let mut h = x.to_owned();
        let keep = 1.0 - self.spec.dropout;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            layer.activation.apply(&mut z);
            inputs.push(h);
            let mut next = z.clone();
            outputs.push(z);
            if l < 2 && self.spec.dropout_sites[l] && self.mode == Mode::Train && self.spec.dropout > 0.0 {
                let scale = 1.0 / keep;
                let mask = Array2::from_shape_simple_fn(next.raw_dim(), || if rng.random_bool(keep) { scale } else { 0.0 });
                next *= &mask;
                masks[l] = Some(mask);
            }
            h = next;
        }
        Ok((h, Cache { version: self.version, inputs, outputs, masks }))
    }

    /// Deterministic evaluation-path forward pass (no dropout, no cache).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            layer.activation.apply(&mut z);
            h = z;
        }
        Ok(h)
    }

    /// Gradients of a scalar loss with respect to the parameters and to the
    /// network input, given `grad_out = ∂loss/∂output`.
    pub fn backward(&self, cache: &Cache, grad_out: ArrayView2<'_, f64>) -> Result<(Gradients, Array2<f64>)> {
        if cache.version != self.version {
            return Err(Error::StaleCache { cache: cache.version, params: self.version });
        }
        if grad_out.dim() != cache.outputs[2].dim() {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, forward output was {:?}",
                grad_out.dim(),
                cache.outputs[2].dim()
            )));
        }
        let mut gw = vec![Array2::zeros((0, 0)); 3];
        let mut gb = vec![Array1::zeros(0); 3];
        let mut g = grad_out.to_owned();
        for l in (0..3).rev() {
            if l < 2 {
                if let Some(mask) = &cache.masks[l] {
                    g *= mask;
                }
            }
            let act = self.layers[l].activation;
            if act != Activation::Identity {
                Zip::from(&mut g).and(&cache.outputs[l]).for_each(|gv, &y| *gv *= act.derivative_from_output(y));
            }
            gw[l] = cache.inputs[l].t().dot(&g);
            gb[l] = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[l].w.t());
        }
        Ok((Gradients { w: gw, b: gb }, g))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            spec: self.spec.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerCheckpoint {
                    rows: l.w.nrows(),
                    cols: l.w.ncols(),
                    weights: l.w.iter().copied().collect(),
                    bias: l.b.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.layers.len() != 3 {
            return Err(Error::Shape(format!("checkpoint has {} layers, expected 3", ck.layers.len())));
        }
        let layers = ck
            .layers
            .iter()
            .enumerate()
            .map(|(l, lc)| {
                let w = Array2::from_shape_vec((lc.rows, lc.cols), lc.weights.clone())
                    .map_err(|e| Error::Shape(format!("layer {l}: {e}")))?;
                Ok(Layer { w, b: Array1::from(lc.bias.clone()), activation: ck.spec.activations[l] })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Self::from_layers(ck.spec.clone(), layers)?;
        if !p.is_finite() {
            return Err(Error::invalid("checkpoint contains non-finite parameters"));
        }
        Ok(p)
    }
}

/// Serializable network weights with explicit shape headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: MlpSpec,
    pub layers: Vec<LayerCheckpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCheckpoint {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    pub step: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, lr: f64, weight_decay: f64) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn adam_update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, st: &AdamState, c1: f64, c2: f64) {
    let g = g + st.weight_decay * *theta;
    *m = st.beta1 * *m + (1.0 - st.beta1) * g;
    *v = st.beta2 * *v + (1.0 - st.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *theta -= st.lr * m_hat / (v_hat.sqrt() + st.eps);
}

/// One bias-corrected Adam update with `λθ` added to the gradient.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !grads.shapes_match(params) || !state.m.shapes_match(params) {
        return Err(Error::Shape("gradient or optimizer state does not match the network".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let st = state.clone();
    for l in 0..params.layers.len() {
        let layer = &mut params.layers[l];
        Zip::from(&mut layer.w)
            .and(&grads.w[l])
            .and(&mut state.m.w[l])
            .and(&mut state.v.w[l])
            .for_each(|th, &g, m, v| adam_update(th, g, m, v, &st, c1, c2));
        Zip::from(&mut layer.b)
            .and(&grads.b[l])
            .and(&mut state.m.b[l])
            .and(&mut state.v.b[l])
            .for_each(|th, &g, m, v| adam_update(th, g, m, v, &st, c1, c2));
    }
    params.version += 1;
    if !params.is_finite() {
        return Err(Error::invalid("Adam produced non-finite parameters"));
    }
    Ok(())
}

/// Multiplies the learning rate by `factor` once the loss has failed to
/// improve on its best value by a relative `threshold` for `patience`
/// consecutive epochs, never going below `min_lr`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrPlateau {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub min_lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl LrPlateau {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::invalid(format!("plateau factor {factor} outside (0, 1)")));
        }
        Ok(Self { lr, factor, patience, threshold: 1e-4, min_lr: 1e-6, best: f64::INFINITY, bad_epochs: 0 })
    }

    /// Records one epoch's loss and returns the learning rate to use next.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.threshold * self.best.abs() || !self.best.is_finite() {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying `losses` through a fresh schedule.
pub fn lr_plateau(lr: f64, losses: &[f64], factor: f64, patience: usize) -> Result<f64> {
    let mut s = LrPlateau::new(lr, factor, patience)?;
    Ok(losses.iter().fold(lr, |_, &l| s.observe(l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use ndarray::array;

    fn spec(sizes: [usize; 4], act: Activation, out: Activation) -> MlpSpec {
        MlpSpec { sizes, activations: [act, act, out], dropout_sites: [false, false], dropout: 0.0 }
    }

    #[test]
    fn zero_tanh_net_outputs_zero() {
        let s = spec([3, 4, 4, 2], Activation::Tanh, Activation::Tanh);
        let mut p = MlpParams::new(s, &mut rng_for(0, &[])).unwrap();
        for l in 0..3 {
            let layer = p.layer_mut(l);
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        assert!(p.predict(x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_net_passes_input_through() {
        let s = spec([3, 3, 3, 3], Activation::Identity, Activation::Identity);
        let layers = (0..3).map(|_| Layer { w: Array2::eye(3), b: Array1::zeros(3), activation: Activation::Identity }).collect();
        let p = MlpParams::from_layers(s, layers).unwrap();
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(p.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut s = MlpSpec::encoder(4, [6, 5], 2, Activation::Tanh, Activation::Identity, 0.5);
        s.dropout_sites = [true, true];
        let mut p = MlpParams::new(s, &mut rng_for(1, &[])).unwrap();
        p.set_mode(Mode::Eval);
        let x = array![[0.1, 0.2, 0.3, 0.4]];
        let mut rng = rng_for(2, &[]);
        let (a, _) = p.forward(x.view(), &mut rng).unwrap();
        let (b, _) = p.forward(x.view(), &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, p.predict(x.view()).unwrap());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = MlpParams::new(spec([3, 4, 4, 2], Activation::Tanh, Activation::Identity), &mut rng_for(0, &[])).unwrap();
        assert!(p.predict(Array2::zeros((2, 4)).view()).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let p = MlpParams::new(spec([4, 3, 3, 2], Activation::Tanh, Activation::Identity), &mut rng_for(3, &[])).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i * 4 + j) as f64 / 10.0);
        let (_, cache) = p.forward(x.view(), &mut rng_for(0, &[])).unwrap();
        let (g, gi) = p.backward(&cache, Array2::zeros((5, 2)).view()).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(gi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn final_bias_gradient_of_half_square_norm() {
        let p = MlpParams::new(spec([4, 3, 3, 2], Activation::Relu, Activation::Identity), &mut rng_for(4, &[])).unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i + 2 * j) % 5) as f64 - 2.0);
        let (out, cache) = p.forward(x.view(), &mut rng_for(0, &[])).unwrap();
        let (g, _) = p.backward(&cache, out.view()).unwrap();
        let expect = out.sum_axis(Axis(0));
        for (a, b) in g.b[2].iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_cache_detected() {
        let mut p = MlpParams::new(spec([2, 2, 2, 2], Activation::Tanh, Activation::Identity), &mut rng_for(5, &[])).unwrap();
        let x = array![[1.0, 2.0]];
        let (out, cache) = p.forward(x.view(), &mut rng_for(0, &[])).unwrap();
        let (g, _) = p.backward(&cache, out.view()).unwrap();
        let mut st = AdamState::new(&p, 0.01, 0.0);
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!(matches!(p.backward(&cache, out.view()), Err(Error::StaleCache { .. })));
    }

    #[test]
    fn adam_fixed_point_and_decay() {
        let mut p = MlpParams::new(spec([3, 2, 2, 1], Activation::Tanh, Activation::Identity), &mut rng_for(6, &[])).unwrap();
        let before = p.clone();
        let zero = Gradients::zeros_like(&p);
        let mut st = AdamState::new(&p, 0.01, 0.0);
        adam_step(&mut p, &zero, &mut st).unwrap();
        assert_eq!(p.layers(), before.layers());

        let mut st = AdamState::new(&p, 0.01, 0.1);
        for _ in 0..10 {
            adam_step(&mut p, &zero, &mut st).unwrap();
        }
        let sq = |q: &MlpParams| q.layers().iter().map(|l| l.w.mapv(|v| v * v).sum()).sum::<f64>();
        assert!(sq(&p) < sq(&before));
    }

    #[test]
    fn scalar_adam_recurrence() {
        // 1x1x1x1 linear net; only the final bias gets gradient 1 each step.
        let s = spec([1, 1, 1, 1], Activation::Identity, Activation::Identity);
        let mut p = MlpParams::new(s, &mut rng_for(7, &[])).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.b[2][0] = 1.0;
        let lr = 0.001;
        let mut st = AdamState::new(&p, lr, 0.0);
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, p.layers()[2].b[0]);
        for t in 1..=50 {
            let prev = p.layers()[2].b[0];
            adam_step(&mut p, &g, &mut st).unwrap();
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            theta -= lr * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            let now = p.layers()[2].b[0];
            assert!((now - theta).abs() < 1e-15);
            assert!(((prev - now) - lr).abs() < 1e-7);
        }
    }

    #[test]
    fn plateau_rules() {
        let dec: Vec<f64> = (0..20).map(|i| 10.0 - i as f64 * 0.1).collect();
        assert_eq!(lr_plateau(0.01, &dec, 0.5, 2).unwrap(), 0.01);

        let mut s = LrPlateau::new(1.0, 0.5, 2).unwrap();
        let lrs: Vec<f64> = (0..7).map(|_| s.observe(3.0)).collect();
        assert_eq!(lrs, vec![1.0, 1.0, 0.5, 0.5, 0.25, 0.25, 0.125]);

        let flat = vec![1.0; 200];
        assert_eq!(lr_plateau(0.01, &flat, 0.5, 1).unwrap(), 1e-6);
        assert!(LrPlateau::new(0.1, 1.0, 2).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = MlpParams::new(MlpSpec::decoder(3, [4, 5], 6, Activation::Relu, Activation::Sigmoid, 0.2), &mut rng_for(8, &[])).unwrap();
        let json = serde_json::to_string(&p.to_checkpoint()).unwrap();
        let back = MlpParams::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.layers(), p.layers());
        let mut bad = p.to_checkpoint();
        bad.layers[1].rows = 3;
        assert!(MlpParams::from_checkpoint(&bad).is_err());
    }
}
