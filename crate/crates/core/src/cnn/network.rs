use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{self, Scalar, KERNEL};
use super::tensor::Tensor;
use crate::scene_io::Chip;
use crate::{rng, Error, Result};

/// One layer of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3×3, stride 1, zero padding 1.
    Conv2d {
        in_ch: usize,
        out_ch: usize,
    },
    Relu,
    /// 2×2, stride 2.
    MaxPool,
    Flatten,
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Softmax,
}

/// Activation shape between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Map { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Map { h, w, c } => h * w * c,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// `(chip_size, chip_size, n_bands)`.
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub n_classes: usize,
}

impl Architecture {
    /// Conv(b→8)-ReLU-Pool-Conv(8→16)-ReLU-Pool-Flatten-Dense(→32)-ReLU-Dense(32→2)-Softmax.
    /// For 32×32×2 chips the first dense layer is 1024→32.
    pub fn default_for(chip_size: usize, n_bands: usize) -> Self {
        let pooled = (chip_size / 2) / 2;
        Self {
            input_shape: (chip_size, chip_size, n_bands),
            layers: vec![
                LayerSpec::Conv2d {
                    in_ch: n_bands,
                    out_ch: 8,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool,
                LayerSpec::Conv2d {
                    in_ch: 8,
                    out_ch: 16,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool,
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_dim: pooled * pooled * 16,
                    out_dim: 32,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    in_dim: 32,
                    out_dim: 2,
                },
                LayerSpec::Softmax,
            ],
            n_classes: 2,
        }
    }

    /// The 32×32×2 default.
    pub fn default_chip() -> Self {
        Self::default_for(32, 2)
    }

    /// Same layer sequence at 8×8×2 with 4/8 channels and an 8-unit hidden
    /// layer (654 parameters), small enough for exhaustive gradient checks.
    pub fn tiny() -> Self {
        Self {
            input_shape: (8, 8, 2),
            layers: vec![
                LayerSpec::Conv2d {
                    in_ch: 2,
                    out_ch: 4,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool,
                LayerSpec::Conv2d {
                    in_ch: 4,
                    out_ch: 8,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool,
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_dim: 32,
                    out_dim: 8,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    in_dim: 8,
                    out_dim: 2,
                },
                LayerSpec::Softmax,
            ],
            n_classes: 2,
        }
    }

    /// Shapes of the input and of every layer output, checking that adjacent
    /// layers agree and that the network ends in a single softmax over
    /// `n_classes`.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let (h, w, c) = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Config(format!(
                "input shape {:?} must be positive",
                self.input_shape
            )));
        }
        let bad = |i: usize, msg: String| Err(Error::Config(format!("layer {i}: {msg}")));
        let mut shapes = vec![Shape::Map { h, w, c }];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = *shapes.last().expect("non-empty");
            let next = match (*layer, cur) {
                (LayerSpec::Conv2d { in_ch, out_ch }, Shape::Map { h, w, c }) => {
                    if in_ch != c || out_ch == 0 {
                        return bad(i, format!("conv expects {in_ch} input channels, got {c}"));
                    }
                    Shape::Map { h, w, c: out_ch }
                }
                (LayerSpec::MaxPool, Shape::Map { h, w, c }) => {
                    if h < 2 || w < 2 {
                        return bad(i, format!("cannot pool a {h}x{w} map"));
                    }
                    Shape::Map {
                        h: h / 2,
                        w: w / 2,
                        c,
                    }
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Flatten, s) => Shape::Flat(s.len()),
                (LayerSpec::Dense { in_dim, out_dim }, Shape::Flat(n)) => {
                    if in_dim != n || out_dim == 0 {
                        return bad(i, format!("dense expects {in_dim} inputs, got {n}"));
                    }
                    Shape::Flat(out_dim)
                }
                (LayerSpec::Softmax, Shape::Flat(n)) => {
                    if i + 1 != self.layers.len() {
                        return bad(i, "softmax must be the final layer".into());
                    }
                    Shape::Flat(n)
                }
                (l, s) => return bad(i, format!("{l:?} cannot follow shape {s:?}")),
            };
            shapes.push(next);
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::Config("network must end with softmax".into()));
        }
        if shapes.last() != Some(&Shape::Flat(self.n_classes)) {
            return Err(Error::Config(format!(
                "network emits {:?}, expected {} classes",
                shapes.last(),
                self.n_classes
            )));
        }
        Ok(shapes)
    }

    /// `(weight_len, bias_len)` of each layer.
    pub fn param_sizes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv2d { in_ch, out_ch } => (KERNEL * KERNEL * in_ch * out_ch, out_ch),
                LayerSpec::Dense { in_dim, out_dim } => (in_dim * out_dim, out_dim),
                _ => (0, 0),
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_sizes().iter().map(|(w, b)| w + b).sum()
    }

    /// Human-readable first difference from `other`, if any.
    pub fn mismatch(&self, other: &Architecture) -> Option<String> {
        for (i, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            if a != b {
                return Some(format!("layer {i}: {a:?} vs {b:?}"));
            }
        }
        if self.layers.len() != other.layers.len() {
            return Some(format!(
                "{} layers vs {}",
                self.layers.len(),
                other.layers.len()
            ));
        }
        if self.input_shape != other.input_shape {
            return Some(format!(
                "input shape {:?} vs {:?}",
                self.input_shape, other.input_shape
            ));
        }
        if self.n_classes != other.n_classes {
            return Some(format!("{} classes vs {}", self.n_classes, other.n_classes));
        }
        None
    }
}

/// Weight and bias of one layer (both empty for parameter-free layers).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(weight: usize, bias: usize) -> Self {
        Self {
            weight: vec![T::zero(); weight],
            bias: vec![T::zero(); bias],
        }
    }

    pub fn convert<U: Scalar>(&self) -> LayerParams<U> {
        LayerParams {
            weight: self
                .weight
                .iter()
                .map(|v| U::from_f64(Scalar::to_f64(*v)))
                .collect(),
            bias: self
                .bias
                .iter()
                .map(|v| U::from_f64(Scalar::to_f64(*v)))
                .collect(),
        }
    }
}

pub type Gradients = Vec<LayerParams<f32>>;

/// Per-band input standardization `(x - mean) / std`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandNorm {
    pub mean: f32,
    pub std: f32,
}

impl Default for BandNorm {
    fn default() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }
}

/// Band statistics over every pixel of `chips`.
pub fn band_norms(chips: &[Chip], n_bands: usize) -> Vec<BandNorm> {
    let mut sum = vec![0.0f64; n_bands];
    let mut sum_sq = vec![0.0f64; n_bands];
    let mut count = 0usize;
    for chip in chips {
        for px in chip.data.chunks_exact(n_bands) {
            for (b, &v) in px.iter().enumerate() {
                let v = f64::from(v);
                sum[b] += v;
                sum_sq[b] += v * v;
            }
            count += 1;
        }
    }
    (0..n_bands)
        .map(|b| {
            if count == 0 {
                return BandNorm::default();
            }
            let mean = sum[b] / count as f64;
            let var = (sum_sq[b] / count as f64 - mean * mean).max(0.0);
            let std = var.sqrt();
            BandNorm {
                mean: mean as f32,
                std: if std > 1e-12 { std as f32 } else { 1.0 },
            }
        })
        .collect()
}

/// A layered network with `f32` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    arch: Architecture,
    shapes: Vec<Shape>,
    pub(crate) params: Vec<LayerParams<f32>>,
    pub(crate) input_norm: Vec<BandNorm>,
}

impl Network {
    /// He-uniform weights (`U(±sqrt(6 / fan_in))`), zero biases, identity
    /// input normalization.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let shapes = arch.shapes()?;
        let mut rng = rng::seeded(seed);
        let params = arch
            .layers
            .iter()
            .zip(arch.param_sizes())
            .map(|(layer, (nw, nb))| {
                let fan_in = match *layer {
                    LayerSpec::Conv2d { in_ch, .. } => KERNEL * KERNEL * in_ch,
                    LayerSpec::Dense { in_dim, .. } => in_dim,
                    _ => 1,
                };
                let limit = (6.0 / fan_in as f64).sqrt() as f32;
                LayerParams {
                    weight: (0..nw).map(|_| rng.random_range(-limit..limit)).collect(),
                    bias: vec![0.0; nb],
                }
            })
            .collect();
        let n_bands = arch.input_shape.2;
        Ok(Self {
            arch,
            shapes,
            params,
            input_norm: vec![BandNorm::default(); n_bands],
        })
    }

    /// Assembles a network from explicit parameters.
    pub fn from_parts(
        arch: Architecture,
        params: Vec<LayerParams<f32>>,
        input_norm: Vec<BandNorm>,
    ) -> Result<Self> {
        let shapes = arch.shapes()?;
        let sizes = arch.param_sizes();
        if params.len() != sizes.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "{} parameter sets for {} layers",
                params.len(),
                sizes.len()
            )));
        }
        for (i, (p, (nw, nb))) in params.iter().zip(sizes).enumerate() {
            if p.weight.len() != nw || p.bias.len() != nb {
                return Err(Error::ArchitectureMismatch(format!(
                    "layer {i}: parameters {}+{} do not fit {:?}",
                    p.weight.len(),
                    p.bias.len(),
                    arch.layers[i]
                )));
            }
            if p.weight.iter().chain(&p.bias).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {i}: non-finite parameter"
                )));
            }
        }
        if input_norm.len() != arch.input_shape.2 {
            return Err(Error::ArchitectureMismatch(format!(
                "{} band normalizers for {} bands",
                input_norm.len(),
                arch.input_shape.2
            )));
        }
        Ok(Self {
            arch,
            shapes,
            params,
            input_norm,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[LayerParams<f32>] {
        &self.params
    }

    pub fn input_norm(&self) -> &[BandNorm] {
        &self.input_norm
    }

    pub fn set_input_norm(&mut self, norm: Vec<BandNorm>) -> Result<()> {
        if norm.len() != self.arch.input_shape.2 {
            return Err(Error::Validation(format!(
                "{} band normalizers for {} bands",
                norm.len(),
                self.arch.input_shape.2
            )));
        }
        self.input_norm = norm;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].len()
    }

    pub(crate) fn engine(&self) -> Engine<'_> {
        Engine {
            layers: &self.arch.layers,
            shapes: &self.shapes,
        }
    }

    /// Standardizes one raw sample in place.
    pub(crate) fn normalize(&self, sample: &mut [f32]) {
        let nb = self.input_norm.len();
        for px in sample.chunks_exact_mut(nb) {
            for (v, n) in px.iter_mut().zip(&self.input_norm) {
                *v = (*v - n.mean) / n.std;
            }
        }
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let (h, w, c) = self.arch.input_shape;
        match batch.shape() {
            [n, bh, bw, bc] if (*bh, *bw, *bc) == (h, w, c) => Ok(*n),
            s => Err(Error::Validation(format!(
                "batch shape {s:?} does not match network input N x {h} x {w} x {c}"
            ))),
        }
    }

    /// Class probabilities, `N × n_classes`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        let n = self.check_batch(batch)?;
        let engine = self.engine();
        let mut ws = Workspace::new(&self.shapes);
        let mut out = Vec::with_capacity(n * self.arch.n_classes);
        let mut sample = vec![0.0f32; self.input_len()];
        for i in 0..n {
            sample.copy_from_slice(batch.item(i));
            self.normalize(&mut sample);
            engine.forward(&self.params, &sample, &mut ws);
            out.extend_from_slice(ws.output());
        }
        Tensor::new(vec![n, self.arch.n_classes], out)
    }

    /// Gradients of the mean cross-entropy of `batch` against `labels`.
    pub fn backward(&self, batch: &Tensor, labels: &[usize]) -> Result<Gradients> {
        let n = self.check_batch(batch)?;
        check_labels(labels, n, self.arch.n_classes)?;
        let engine = self.engine();
        let mut ws = Workspace::new(&self.shapes);
        let mut grads = zero_grads::<f32>(&self.arch);
        let scale = 1.0 / n as f32;
        let mut sample = vec![0.0f32; self.input_len()];
        for (i, &label) in labels.iter().enumerate() {
            sample.copy_from_slice(batch.item(i));
            self.normalize(&mut sample);
            engine.forward(&self.params, &sample, &mut ws);
            engine.backward(&self.params, &mut ws, label, scale, &mut grads);
        }
        Ok(grads)
    }

    /// Predicted class per chip (argmax, ties to the lower index).
    pub fn predict(&self, chips: &[Chip]) -> Result<Vec<usize>> {
        if chips.is_empty() {
            return Ok(Vec::new());
        }
        let probs = self.forward(&Tensor::from_chips(chips)?)?;
        Ok((0..chips.len()).map(|i| argmax(probs.item(i))).collect())
    }
}

pub(crate) fn check_labels(labels: &[usize], n: usize, n_classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Validation(format!(
            "label {l} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

pub(crate) fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn zero_grads<T: Scalar>(arch: &Architecture) -> Vec<LayerParams<T>> {
    arch.param_sizes()
        .into_iter()
        .map(|(w, b)| LayerParams::zeros(w, b))
        .collect()
}

/// Probability floor inside the log of the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean `-ln(p[true class])` over the rows of `probs`.
pub fn loss_ce(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let shape = probs.shape();
    if shape.len() != 2 {
        return Err(Error::Validation(format!(
            "probabilities must be N x K, got {shape:?}"
        )));
    }
    check_labels(labels, shape[0], shape[1])?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| -(f64::from(probs.item(i)[l])).max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Scratch buffers: `acts[0]` is the input, `acts[i + 1]` the output of
/// layer `i`.
pub(crate) struct Workspace<T> {
    acts: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    grad_a: Vec<T>,
    grad_b: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub(crate) fn new(shapes: &[Shape]) -> Self {
        let largest = shapes.iter().map(Shape::len).max().unwrap_or(0);
        Self {
            acts: shapes.iter().map(|s| vec![T::zero(); s.len()]).collect(),
            argmax: shapes[1..].iter().map(|s| vec![0; s.len()]).collect(),
            grad_a: vec![T::zero(); largest],
            grad_b: vec![T::zero(); largest],
        }
    }

    pub(crate) fn output(&self) -> &[T] {
        self.acts.last().expect("at least the input")
    }
}

/// Borrowed view of an architecture used by the generic kernels.
pub(crate) struct Engine<'a> {
    pub(crate) layers: &'a [LayerSpec],
    pub(crate) shapes: &'a [Shape],
}

impl Engine<'_> {
    pub(crate) fn forward<T: Scalar>(
        &self,
        params: &[LayerParams<T>],
        input: &[T],
        ws: &mut Workspace<T>,
    ) {
        ws.acts[0].copy_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            match (*layer, self.shapes[i]) {
                (LayerSpec::Conv2d { in_ch, out_ch }, Shape::Map { h, w, .. }) => {
                    let p = &params[i];
                    layers::conv2d_forward(x, h, w, in_ch, &p.weight, &p.bias, out_ch, y);
                }
                (LayerSpec::Relu, _) => layers::relu_forward(x, y),
                (LayerSpec::MaxPool, Shape::Map { h, w, c }) => {
                    layers::maxpool_forward(x, h, w, c, y, &mut ws.argmax[i]);
                }
                (LayerSpec::Flatten, _) => y.copy_from_slice(x),
                (LayerSpec::Dense { .. }, _) => {
                    let p = &params[i];
                    layers::dense_forward(x, &p.weight, &p.bias, y);
                }
                (LayerSpec::Softmax, _) => layers::softmax(x, y),
                (l, s) => unreachable!("{l:?} on {s:?} rejected by Architecture::shapes"),
            }
        }
    }

    /// Appends the piecewise-linear branch taken by the last forward pass:
    /// the sign of every ReLU input and every max-pool winner.
    pub(crate) fn kinks<T: Scalar>(&self, ws: &Workspace<T>, out: &mut Vec<u32>) {
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Relu => out.extend(ws.acts[i].iter().map(|&v| u32::from(v > T::zero()))),
                LayerSpec::MaxPool => out.extend_from_slice(&ws.argmax[i]),
                _ => {}
            }
        }
    }

    /// Accumulates `scale ×` the cross-entropy gradient of the last forward
    /// pass into `grads`. The final softmax and the loss are differentiated
    /// together: `dlogits = p - onehot(label)`.
    pub(crate) fn backward<T: Scalar>(
        &self,
        params: &[LayerParams<T>],
        ws: &mut Workspace<T>,
        label: usize,
        scale: T,
        grads: &mut [LayerParams<T>],
    ) {
        let last = self.layers.len() - 1;
        {
            let probs = &ws.acts[last + 1];
            let g = &mut ws.grad_a[..probs.len()];
            for (k, (gk, &p)) in g.iter_mut().zip(probs).enumerate() {
                let target = if k == label { T::one() } else { T::zero() };
                *gk = (p - target) * scale;
            }
        }
        for i in (0..last).rev() {
            let in_len = self.shapes[i].len();
            let out_len = self.shapes[i + 1].len();
            let need_din = i > 0;
            let x = &ws.acts[i];
            let dout = &ws.grad_a[..out_len];
            let din = &mut ws.grad_b[..in_len];
            match (self.layers[i], self.shapes[i]) {
                (LayerSpec::Conv2d { in_ch, out_ch }, Shape::Map { h, w, .. }) => {
                    let g = &mut grads[i];
                    layers::conv2d_backward(
                        x,
                        h,
                        w,
                        in_ch,
                        &params[i].weight,
                        out_ch,
                        dout,
                        &mut g.weight,
                        &mut g.bias,
                        need_din.then_some(din),
                    );
                }
                (LayerSpec::Relu, _) => layers::relu_backward(x, dout, din),
                (LayerSpec::MaxPool, _) => layers::maxpool_backward(dout, &ws.argmax[i], din),
                (LayerSpec::Flatten, _) => din.copy_from_slice(dout),
                (LayerSpec::Dense { .. }, _) => {
                    let g = &mut grads[i];
                    layers::dense_backward(
                        x,
                        &params[i].weight,
                        dout,
                        &mut g.weight,
                        &mut g.bias,
                        need_din.then_some(din),
                    );
                }
                (l, s) => unreachable!("{l:?} on {s:?} cannot appear before the final softmax"),
            }
            std::mem::swap(&mut ws.grad_a, &mut ws.grad_b);
        }
    }
}
