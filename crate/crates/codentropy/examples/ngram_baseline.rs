//! Fit the Witten-Bell interpolated n-gram baseline on a toy text and
//! inspect its predictions and per-character entropies.
//!
//! ```bash
//! cargo run --release --example ngram_baseline
//! ```

use codentropy::corpus::Vocabulary;
use codentropy::lm::LanguageModel;
use codentropy::ngram::NgramModel;
use codentropy::scoring::char_entropy;

fn main() -> codentropy::Result<()> {
    let text = b"int count = 0;\ncount = count + 1;\ncount = count + 1;\nreturn count;\n";
    let vocab = Vocabulary::from_bytes(text)?;
    let stream = vocab.encode(text);
    let model = NgramModel::fit(&[&stream], 5, vocab.size())?;
    println!(
        "order-{} model over {} tokens, {} distinct contexts\n",
        model.order(),
        stream.len(),
        model.context_total()
    );

    for context in ["coun", "nt +", "retu", "zzzz"] {
        let ctx_ids: Vec<u16> = context.bytes().map(|b| vocab.id_for(b)).collect();
        let dist = model.predict(&ctx_ids);
        let mut ranked: Vec<(usize, f64)> = dist
            .probs()
            .iter()
            .enumerate()
            .map(|(i, &p)| (i, p))
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let shown: Vec<String> = ranked
            .iter()
            .take(3)
            .map(|&(id, p)| {
                let ch = vocab
                    .byte_for(id as u16)
                    .map(|b| format!("{:?}", b as char))
                    .unwrap_or_else(|| "<unk>".into());
                format!("{ch} {p:.3}")
            })
            .collect();
        println!(
            "after {context:?}: top {} | entropy {:.3} bits",
            shown.join(", "),
            char_entropy(&dist)
        );
    }

    // Per-position entropy over the stream itself: repeated lines become
    // cheap, the first occurrences stay expensive.
    let mut values = Vec::new();
    model.scan(&stream.ids, &mut |_, dist| values.push(char_entropy(dist)))?;
    println!("\nmean predictive entropy over the corpus: {:.3} bits",
        values.iter().sum::<f64>() / values.len() as f64);
    Ok(())
}
