//! Finite-difference verification of backpropagation.
//!
//! Both sides run on a 64-bit copy of the network: the analytic gradient
//! from the same generic backward pass used in training, and central
//! differences `(L(θ + h) - L(θ - h)) / 2h` per parameter, with `h` reduced
//! where the perturbation crosses a ReLU or max-pool kink.

use super::layers::Scalar;
use super::network::{check_labels, zero_grads, LayerParams, Network, Workspace, PROB_FLOOR};
use super::tensor::Tensor;
use crate::{Error, Result};

struct Shadow<'a> {
    net: &'a Network,
    params: Vec<LayerParams<f64>>,
    inputs: Vec<Vec<f64>>,
    labels: &'a [usize],
}

impl<'a> Shadow<'a> {
    fn new(net: &'a Network, batch: &Tensor, labels: &'a [usize]) -> Result<Self> {
        let probe = net.forward(batch)?;
        check_labels(labels, probe.shape()[0], net.architecture().n_classes)?;
        let inputs = (0..labels.len())
            .map(|i| {
                let mut s = batch.item(i).to_vec();
                net.normalize(&mut s);
                s.into_iter().map(f64::from).collect()
            })
            .collect();
        Ok(Self {
            net,
            params: net.params().iter().map(LayerParams::convert).collect(),
            inputs,
            labels,
        })
    }

    /// Mean loss, with the branch pattern of every sample written to `kinks`.
    fn loss(&self, ws: &mut Workspace<f64>, kinks: &mut Vec<u32>) -> f64 {
        let engine = self.net.engine();
        kinks.clear();
        let mut total = 0.0;
        for (x, &l) in self.inputs.iter().zip(self.labels) {
            engine.forward(&self.params, x, ws);
            engine.kinks(ws, kinks);
            total -= ws.output()[l].max(PROB_FLOOR).ln();
        }
        total / self.labels.len() as f64
    }

    /// Central difference for one parameter. A step that moves a ReLU input
    /// across zero or changes a max-pool winner differences two linear pieces,
    /// so it is divided by 10 until both sides stay on the branch of the
    /// unperturbed point (at most `REFINEMENTS` times).
    fn numeric(
        &mut self,
        ws: &mut Workspace<f64>,
        at: &[u32],
        layer: usize,
        bias: bool,
        i: usize,
        step: f64,
    ) -> f64 {
        let original = *self.param_mut(layer, bias, i);
        let (mut kp, mut km) = (Vec::new(), Vec::new());
        let mut h = step;
        let mut estimate = 0.0;
        for _ in 0..=REFINEMENTS {
            *self.param_mut(layer, bias, i) = original + h;
            let plus = self.loss(ws, &mut kp);
            *self.param_mut(layer, bias, i) = original - h;
            let minus = self.loss(ws, &mut km);
            estimate = (plus - minus) / (2.0 * h);
            if kp == at && km == at {
                break;
            }
            h /= 10.0;
        }
        *self.param_mut(layer, bias, i) = original;
        estimate
    }

    fn param_mut(&mut self, layer: usize, bias: bool, i: usize) -> &mut f64 {
        let p = &mut self.params[layer];
        if bias {
            &mut p.bias[i]
        } else {
            &mut p.weight[i]
        }
    }

    fn analytic(&self, ws: &mut Workspace<f64>) -> Vec<LayerParams<f64>> {
        let engine = self.net.engine();
        let mut grads = zero_grads::<f64>(self.net.architecture());
        let scale = 1.0 / self.labels.len() as f64;
        for (x, &l) in self.inputs.iter().zip(self.labels) {
            engine.forward(&self.params, x, ws);
            engine.backward(&self.params, ws, l, scale, &mut grads);
        }
        grads
    }
}

const REFINEMENTS: usize = 4;

fn relative_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-8)
}

/// Largest relative error `|a - f| / max(|a|, |f|, 1e-8)` over every
/// parameter.
pub fn grad_check(net: &Network, batch: &Tensor, labels: &[usize], step: f64) -> Result<f64> {
    grad_check_every(net, batch, labels, step, 1)
}

/// [`grad_check`] restricted to every `stride`-th parameter of each tensor,
/// for networks too large to check exhaustively.
pub fn grad_check_every(
    net: &Network,
    batch: &Tensor,
    labels: &[usize],
    step: f64,
    stride: usize,
) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) || stride == 0 {
        return Err(Error::Config(format!(
            "invalid step {step} or stride {stride}"
        )));
    }
    let mut shadow = Shadow::new(net, batch, labels)?;
    let mut ws = Workspace::<f64>::new(net.engine().shapes);
    let grads = shadow.analytic(&mut ws);
    let mut at = Vec::new();
    shadow.loss(&mut ws, &mut at);
    let mut worst = 0.0f64;
    for (layer, g) in grads.iter().enumerate() {
        for bias in [false, true] {
            let n = if bias { g.bias.len() } else { g.weight.len() };
            for i in (0..n).step_by(stride) {
                let numeric = shadow.numeric(&mut ws, &at, layer, bias, i, step);
                let a = if bias { g.bias[i] } else { g.weight[i] };
                worst = worst.max(relative_error(a, numeric));
            }
        }
    }
    Ok(worst)
}

/// Largest absolute difference between the `f32` training gradient and the
/// 64-bit shadow gradient.
pub fn f32_gradient_deviation(net: &Network, batch: &Tensor, labels: &[usize]) -> Result<f64> {
    let shadow = Shadow::new(net, batch, labels)?;
    let mut ws = Workspace::<f64>::new(net.engine().shapes);
    let reference = shadow.analytic(&mut ws);
    let grads = net.backward(batch, labels)?;
    let mut worst = 0.0f64;
    for (g, r) in grads.iter().zip(&reference) {
        for (a, b) in g
            .weight
            .iter()
            .chain(&g.bias)
            .zip(r.weight.iter().chain(&r.bias))
        {
            worst = worst.max((a.to_f64() - b).abs());
        }
    }
    Ok(worst)
}
