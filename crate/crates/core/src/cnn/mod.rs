//! From-scratch convolutional chip classifier.
//!
//! [`Network`] holds an [`Architecture`] (a list of [`LayerSpec`]s), `f32`
//! parameters and per-band input standardization. [`train`] runs seeded
//! mini-batch SGD with momentum; [`save_weights`]/[`load_weights`] persist a
//! network, and a loaded file passed as
//! [`TrainConfig::init_weights_path`] warm-starts training.

mod gradcheck;
pub mod layers;
mod network;
mod tensor;
mod train;
mod weights;

pub use gradcheck::{f32_gradient_deviation, grad_check, grad_check_every};
pub use network::{
    band_norms, loss_ce, Architecture, BandNorm, Gradients, LayerParams, LayerSpec, Network, Shape,
    PROB_FLOOR,
};
pub use tensor::Tensor;
pub use train::{accuracy, train, TrainConfig, TrainHistory};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, MAGIC};

/// Class probabilities for a batch; see [`Network::forward`].
pub fn forward(net: &Network, batch: &Tensor) -> crate::Result<Tensor> {
    net.forward(batch)
}

/// Mean cross-entropy gradients; see [`Network::backward`].
pub fn backward(net: &Network, batch: &Tensor, labels: &[usize]) -> crate::Result<Gradients> {
    net.backward(batch, labels)
}
