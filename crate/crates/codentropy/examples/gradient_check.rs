//! Verify the hand-derived backpropagation against central finite
//! differences, parameter by parameter.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use codentropy::nn::{finite_difference_check, LstmParams, LstmState, ModelConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> codentropy::Result<()> {
    let config = ModelConfig {
        vocab_size: 10,
        embed_dim: 6,
        hidden_dim: 8,
        num_layers: 2,
        bptt_len: 50,
        rng_seed: 0,
    };
    let mut params = LstmParams::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_810);
    for x in params.data_mut() {
        *x = rng.gen_range(-0.5..0.5);
    }
    let mut state = LstmState::zeros(&config);
    for l in 0..config.num_layers {
        for j in 0..config.hidden_dim {
            state.h[l][j] = rng.gen_range(-0.4..0.4);
            state.c[l][j] = rng.gen_range(-0.4..0.4);
        }
    }
    let tokens: Vec<u16> = (0..5).map(|_| rng.gen_range(0..10)).collect();
    let targets: Vec<u16> = (0..5).map(|_| rng.gen_range(0..10)).collect();

    println!(
        "checking {} parameters of a {}-layer LSTM (hidden {}, embed {}) over a {}-token window",
        params.data().len(),
        config.num_layers,
        config.hidden_dim,
        config.embed_dim,
        tokens.len()
    );
    let start = std::time::Instant::now();
    let worst = finite_difference_check(&mut params, &state, &tokens, &targets, 1e-5)?;
    println!(
        "max relative error vs central differences: {worst:.3e} ({:?})",
        start.elapsed()
    );
    assert!(worst < 1e-5);
    println!("gradients check out");
    Ok(())
}
