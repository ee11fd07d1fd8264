//! ROC/AUC evaluation on synthetic score distributions: buggy lines drawn
//! slightly higher than clean ones, plus the invariances that make AUC a
//! safe metric for entropy scores.
//!
//! ```bash
//! cargo run --release --example evaluate_roc
//! ```

use codentropy::corpus::LineLabel;
use codentropy::eval::{auc, render_table, roc_csv, summarize};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> codentropy::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut scores = Vec::new();
    for _ in 0..200 {
        scores.push((1.2 + rng.gen_range(0.0..1.0), LineLabel::Buggy));
        scores.push((0.8 + rng.gen_range(0.0..1.0), LineLabel::Clean));
    }

    let report = summarize(&scores)?;
    print!("{}", render_table(&[("synthetic".to_string(), report.clone())]));
    println!("\nROC curve has {} points; first rows:", report.roc_points.len());
    for line in roc_csv(&report).lines().take(5) {
        println!("  {line}");
    }

    // Entropy log base and mixture scaling cannot change the ranking, so
    // AUC is invariant under any strictly increasing transform.
    let base = auc(&scores)?;
    for (name, f) in [
        ("bits -> nats (x ln 2)", (|x: f64| x * std::f64::consts::LN_2) as fn(f64) -> f64),
        ("affine (2x + 7)", |x| 2.0 * x + 7.0),
        ("exponential", |x| x.exp()),
    ] {
        let mapped: Vec<(f64, LineLabel)> = scores.iter().map(|&(v, l)| (f(v), l)).collect();
        println!("auc after {name}: {:.12} (base {:.12})", auc(&mapped)?, base);
    }

    let flipped: Vec<(f64, LineLabel)> = scores
        .iter()
        .map(|&(v, l)| {
            let swap = match l {
                LineLabel::Buggy => LineLabel::Clean,
                LineLabel::Clean => LineLabel::Buggy,
            };
            (v, swap)
        })
        .collect();
    println!("auc with labels flipped: {:.4} = 1 - {:.4}", auc(&flipped)?, base);
    Ok(())
}
