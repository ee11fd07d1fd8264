//! Score every line of a mutated file under a global+local model mixture
//! and print the per-line entropies next to the ground-truth labels.
//!
//! ```bash
//! cargo run --release --example score_lines
//! ```

use codentropy::corpus::{load_split, LineLabel};
use codentropy::pipeline::{
    build_vocabulary, fit_ngram, score_targets, synthesize, Model, Role,
};
use codentropy::scoring::{Metric, ScoringConfig};
use codentropy::synth::GeneratorConfig;

fn main() -> codentropy::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let gen = GeneratorConfig {
        rng_seed: 21,
        n_files: 12,
        functions_per_file: (2, 4),
        identifier_pool_size: 10,
        statement_depth: 2,
    };
    let out = synthesize(dir.path(), &gen, 0.7, 0.1)?;
    let split = load_split(&out.manifest)?;
    let vocab = build_vocabulary(&split)?;

    // The n-gram family keeps this example fast; swap in train_lstm for the
    // neural path.
    let global = Model::Ngram(fit_ngram(&split, Role::Global, &vocab, 5)?);
    let local = Model::Ngram(fit_ngram(&split, Role::Local, &vocab, 5)?);

    let config = ScoringConfig {
        lambda: 0.5,
        metric: Metric::CrossEntropy,
    };
    let target = split
        .test_lines
        .iter()
        .find(|l| l.label == LineLabel::Buggy)
        .map(|l| l.file.clone())
        .expect("at least one buggy line");
    let rows = score_targets(
        &global,
        Some(&local),
        &vocab,
        std::slice::from_ref(&target),
        &split.label_map(),
        &config,
    )?;

    println!(
        "{} ({} lines; cross-entropy in bits/char, lambda 0.5)\n",
        target.file_name().unwrap().to_string_lossy(),
        rows.len()
    );
    println!("line  h_global  h_local   h_total   label");
    let text = std::fs::read_to_string(&target).expect("read target");
    for (row, line) in rows.iter().zip(text.lines()) {
        let marker = match row.label {
            Some(LineLabel::Buggy) => "  <-- buggy",
            Some(LineLabel::Clean) => "  <-- clean",
            None => "",
        };
        println!(
            "{:>4}  {:>8.4}  {:>8.4}  {:>8.4}  {}{}",
            row.line_number,
            row.h_global,
            row.h_local.unwrap(),
            row.h_total,
            line.trim_end(),
            marker
        );
    }
    Ok(())
}
