use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{argmax, band_norms, zero_grads, Network, Workspace, PROB_FLOOR};
use super::weights::load_weights;
use crate::scene_io::Chip;
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Warm start: parameters (and input normalization) are loaded from this
    /// weight file before the first epoch.
    pub init_weights_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            init_weights_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum {} must lie in [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub wall_time_ms: f64,
}

/// Labeled chips flattened, standardized, and checked against the network.
struct Prepared {
    data: Vec<f32>,
    labels: Vec<usize>,
    stride: usize,
}

impl Prepared {
    fn new(net: &Network, chips: &[Chip], what: &str) -> Result<Self> {
        let (h, w, c) = net.architecture().input_shape;
        let stride = net.input_len();
        let mut data = Vec::with_capacity(chips.len() * stride);
        let mut labels = Vec::with_capacity(chips.len());
        for (i, chip) in chips.iter().enumerate() {
            if (chip.size, chip.size, chip.n_bands) != (h, w, c) || chip.data.len() != stride {
                return Err(Error::Validation(format!(
                    "{what} chip {i} is {}x{}x{}, network expects {h}x{w}x{c}",
                    chip.size, chip.size, chip.n_bands
                )));
            }
            let label = chip
                .label
                .ok_or_else(|| Error::Validation(format!("{what} chip {i} has no label")))?;
            labels.push(label.index());
            let start = data.len();
            data.extend_from_slice(&chip.data);
            net.normalize(&mut data[start..]);
        }
        Ok(Self {
            data,
            labels,
            stride,
        })
    }

    fn sample(&self, i: usize) -> &[f32] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    fn accuracy(&self, net: &Network, ws: &mut Workspace<f32>) -> f64 {
        let engine = net.engine();
        let correct = (0..self.labels.len())
            .filter(|&i| {
                engine.forward(&net.params, self.sample(i), ws);
                argmax(ws.output()) == self.labels[i]
            })
            .count();
        correct as f64 / self.labels.len() as f64
    }
}

/// Mini-batch SGD with momentum on mean cross-entropy.
///
/// Starts from `net`'s parameters, or from `cfg.init_weights_path` when set.
/// On a cold start the per-band input normalization is computed from
/// `train_chips`; a warm start keeps the loaded one. Batches are drawn from
/// a permutation reshuffled every epoch by a generator seeded with
/// `cfg.seed`, and gradients are summed in sample order, so a run is
/// bit-reproducible.
pub fn train(
    mut net: Network,
    train_chips: &[Chip],
    val_chips: &[Chip],
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    if train_chips.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if val_chips.is_empty() {
        return Err(Error::Validation("validation set is empty".into()));
    }
    if let Some(path) = &cfg.init_weights_path {
        let loaded = load_weights(path)?;
        if let Some(diff) = net.architecture().mismatch(loaded.architecture()) {
            return Err(Error::ArchitectureMismatch(format!(
                "{} does not match the network: {diff}",
                path.display()
            )));
        }
        net = loaded;
    } else {
        let norms = band_norms(train_chips, net.architecture().input_shape.2);
        net.set_input_norm(norms)?;
    }

    let train_set = Prepared::new(&net, train_chips, "training")?;
    let val_set = Prepared::new(&net, val_chips, "validation")?;

    let engine_shapes = net.engine().shapes.to_vec();
    let mut ws = Workspace::<f32>::new(&engine_shapes);
    let mut grads = zero_grads::<f32>(net.architecture());
    let mut velocity = zero_grads::<f32>(net.architecture());
    let lr = cfg.learning_rate as f32;
    let mu = cfg.momentum as f32;
    let mut order: Vec<usize> = (0..train_set.labels.len()).collect();
    let mut shuffle_rng = rng::seeded(cfg.seed);
    let mut history = TrainHistory::default();

    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            for g in grads.iter_mut() {
                g.weight.iter_mut().for_each(|v| *v = 0.0);
                g.bias.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 1.0 / batch.len() as f32;
            let engine = net.engine();
            for &i in batch {
                let label = train_set.labels[i];
                engine.forward(&net.params, train_set.sample(i), &mut ws);
                loss_sum -= f64::from(ws.output()[label]).max(PROB_FLOOR).ln();
                engine.backward(&net.params, &mut ws, label, scale, &mut grads);
            }
            for ((p, g), v) in net.params.iter_mut().zip(&grads).zip(velocity.iter_mut()) {
                for ((w, &gw), vw) in p.weight.iter_mut().zip(&g.weight).zip(v.weight.iter_mut()) {
                    *vw = mu * *vw - lr * gw;
                    *w += *vw;
                }
                for ((b, &gb), vb) in p.bias.iter_mut().zip(&g.bias).zip(v.bias.iter_mut()) {
                    *vb = mu * *vb - lr * gb;
                    *b += *vb;
                }
            }
        }
        let loss = loss_sum / train_set.labels.len() as f64;
        if !loss.is_finite()
            || net
                .params
                .iter()
                .any(|p| p.weight.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Validation(format!(
                "training diverged at epoch {}",
                epoch + 1
            )));
        }
        history.train_loss.push(loss);
        history.val_accuracy.push(val_set.accuracy(&net, &mut ws));
    }
    history.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((net, history))
}

/// Fraction of labeled chips the network classifies correctly.
pub fn accuracy(net: &Network, chips: &[Chip]) -> Result<f64> {
    if chips.is_empty() {
        return Err(Error::Validation("no chips to evaluate".into()));
    }
    let set = Prepared::new(net, chips, "evaluation")?;
    let mut ws = Workspace::<f32>::new(net.engine().shapes);
    Ok(set.accuracy(net, &mut ws))
}
