//! Generate a synthetic pseudo-Java corpus, inject line-level bugs into its
//! local half, and show what the injector did.
//!
//! ```bash
//! cargo run --release --example synthesize
//! ```

use codentropy::corpus::{load_split, LineLabel};
use codentropy::pipeline::synthesize;
use codentropy::synth::GeneratorConfig;

fn main() -> codentropy::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = GeneratorConfig {
        rng_seed: 7,
        n_files: 10,
        functions_per_file: (2, 4),
        identifier_pool_size: 12,
        statement_depth: 2,
    };
    let out = synthesize(dir.path(), &config, 0.7, 0.08)?;
    println!(
        "generated {} global + {} local files under {}",
        out.n_global,
        out.n_local,
        dir.path().display()
    );

    let split = load_split(&out.manifest)?;
    let buggy = split
        .test_lines
        .iter()
        .filter(|l| l.label == LineLabel::Buggy)
        .count();
    println!(
        "manifest: {} labeled lines ({} buggy, {} clean)\n",
        split.test_lines.len(),
        buggy,
        split.test_lines.len() - buggy
    );

    println!("sample of the generated code:");
    let text = std::fs::read_to_string(&split.global_train[0]).expect("read sample");
    for line in text.lines().take(12) {
        println!("    {line}");
    }

    println!("\nsample injected bugs:");
    for inj in out.injections.iter().take(5) {
        println!(
            "  {}:{} [{}]\n    - {}\n    + {}",
            inj.file.file_name().unwrap().to_string_lossy(),
            inj.line_number,
            inj.mutation.as_str(),
            inj.original_line.trim_start(),
            inj.mutated_line.trim_start()
        );
    }
    Ok(())
}
