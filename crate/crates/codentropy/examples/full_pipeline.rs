//! The whole experiment at reduced scale: synthesize a corpus with injected
//! bugs, train global and local models of both families, score every local
//! line by mixed per-character cross-entropy, and compare how well each
//! model family separates buggy from clean lines.
//!
//! Takes two to three minutes in release mode.
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```

use codentropy::corpus::load_split;
use codentropy::eval::render_table;
use codentropy::nn::ModelConfig;
use codentropy::optim::AdamConfig;
use codentropy::pipeline::{
    build_vocabulary, evaluate, fit_ngram, score_targets, synthesize, train_lstm, Model, Role,
    ScoreColumn,
};
use codentropy::scoring::{Metric, ScoringConfig};
use codentropy::synth::GeneratorConfig;

fn main() -> codentropy::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let gen = GeneratorConfig {
        rng_seed: 2024,
        n_files: 30,
        functions_per_file: (4, 8),
        identifier_pool_size: 12,
        statement_depth: 3,
    };
    println!("synthesizing corpus...");
    let out = synthesize(dir.path(), &gen, 0.7, 0.06)?;
    let split = load_split(&out.manifest)?;
    let vocab = build_vocabulary(&split)?;
    println!(
        "  {} global / {} local files, {} labeled lines, vocab {}",
        split.global_train.len(),
        split.local_train.len(),
        split.test_lines.len(),
        vocab.size()
    );

    let model_config = |seed| ModelConfig {
        vocab_size: vocab.size(),
        embed_dim: 32,
        hidden_dim: 64,
        num_layers: 2,
        bptt_len: 50,
        rng_seed: seed,
    };
    let adam = AdamConfig {
        alpha: 3e-3,
        batch_size: 32,
        ..AdamConfig::new(900)
    };

    println!("training global LSTM...");
    let (g_lstm, g_log) = train_lstm(&split, Role::Global, &vocab, &model_config(1), &adam)?;
    println!(
        "  final cross-entropy {:.3} bits/char",
        g_log.final_cross_entropy_bits().unwrap()
    );
    println!("training local LSTM...");
    let (l_lstm, l_log) = train_lstm(&split, Role::Local, &vocab, &model_config(2), &adam)?;
    println!(
        "  final cross-entropy {:.3} bits/char",
        l_log.final_cross_entropy_bits().unwrap()
    );
    println!("fitting n-gram baselines...");
    let g_ngram = fit_ngram(&split, Role::Global, &vocab, 5)?;
    let l_ngram = fit_ngram(&split, Role::Local, &vocab, 5)?;

    let scoring = ScoringConfig {
        lambda: 0.5,
        metric: Metric::CrossEntropy,
    };
    let labels = split.label_map();
    println!("scoring local lines...\n");
    let lstm_rows = score_targets(
        &Model::Lstm(g_lstm),
        Some(&Model::Lstm(l_lstm)),
        &vocab,
        &split.local_train,
        &labels,
        &scoring,
    )?;
    let ngram_rows = score_targets(
        &Model::Ngram(g_ngram),
        Some(&Model::Ngram(l_ngram)),
        &vocab,
        &split.local_train,
        &labels,
        &scoring,
    )?;

    let named = vec![
        ("lstm global".to_string(), evaluate(&lstm_rows, ScoreColumn::Global)?),
        ("lstm global+local".to_string(), evaluate(&lstm_rows, ScoreColumn::Total)?),
        ("ngram global".to_string(), evaluate(&ngram_rows, ScoreColumn::Global)?),
        ("ngram global+local".to_string(), evaluate(&ngram_rows, ScoreColumn::Total)?),
    ];
    print!("{}", render_table(&named));
    println!("\n(auc: probability a buggy line outscores a clean one; gap: buggy - clean mean bits)");
    Ok(())
}
