//! Finite-difference check of backpropagation on small seeded networks, over
//! a range of step sizes.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use sarvessel::cnn::{grad_check, grad_check_every, Architecture, Network, Tensor};

fn batch(n: usize, (h, w, c): (usize, usize, usize), seed: u64) -> sarvessel::Result<Tensor> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * h * w * c)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Tensor::new(vec![n, h, w, c], data)
}

fn main() -> sarvessel::Result<()> {
    let labels = [0, 1, 1, 0];
    for seed in 0..3 {
        let net = Network::new(Architecture::tiny(), seed)?;
        let x = batch(4, Architecture::tiny().input_shape, 100 + seed)?;
        let errs = [1e-1, 1e-2, 1e-3, 1e-4]
            .map(|h| grad_check(&net, &x, &labels, h).map(|e| format!("h={h:.0e}: {e:.2e}")))
            .into_iter()
            .collect::<sarvessel::Result<Vec<_>>>()?;
        println!("tiny net, seed {seed}: {}", errs.join("  "));
    }

    let arch = Architecture::default_chip();
    let net = Network::new(arch.clone(), 0)?;
    let x = batch(2, arch.input_shape, 7)?;
    let err = grad_check_every(&net, &x, &[1, 0], 1e-3, 97)?;
    println!("default net, every 97th parameter: {err:.2e}");
    Ok(())
}
