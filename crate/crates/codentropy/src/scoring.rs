//! Per-character predictive entropy, per-line averaging, and the weighted
//! global+local mixture. Works for any `LanguageModel`.
//!
//! A file is processed as one sequence: model state carries across line
//! boundaries and resets between files. At each position `t` the model's
//! distribution over the *next* token is reduced to the configured metric,
//! and a line's score is the arithmetic mean of the metric values at the
//! positions inside its span (the terminating newline included).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{LineLabel, TokenStream};
use crate::csvio;
use crate::error::{Error, Result};
use crate::lm::{LanguageModel, PredictiveDistribution};

const LN_2: f64 = std::f64::consts::LN_2;

/// Per-character naturalness metric.
///
/// `PredictiveEntropy` is the uncertainty of the next-token distribution
/// itself; `CrossEntropy` is the cost of the token that actually follows.
/// The final position of a stream has no successor, so it contributes no
/// cross-entropy value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    PredictiveEntropy,
    CrossEntropy,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::PredictiveEntropy => "predictive_entropy",
            Metric::CrossEntropy => "cross_entropy",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predictive_entropy" => Ok(Metric::PredictiveEntropy),
            "cross_entropy" => Ok(Metric::CrossEntropy),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric `{other}` (expected predictive_entropy or cross_entropy)"
            ))),
        }
    }
}

/// Mixture weight and metric choice. Entropies are always reported in bits.
#[derive(Debug, Clone)]
pub struct ScoringConfig {
    /// Weight of the global model's score in the mixture, in [0, 1].
    pub lambda: f64,
    pub metric: Metric,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            metric: Metric::PredictiveEntropy,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Shannon entropy of a distribution, in bits, with 0 log 0 = 0.
pub fn char_entropy(dist: &PredictiveDistribution) -> f64 {
    let mut h = 0.0;
    for &p in dist.probs() {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// One line's averaged metric value.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEntropy {
    /// 1-based.
    pub line_number: usize,
    /// Mean metric value over the line's positions, in bits.
    pub value: f64,
    /// Characters in the line (its full span, newline included).
    pub char_count: usize,
}

/// Score every line of one encoded file under one model.
pub fn score_file(
    model: &dyn LanguageModel,
    stream: &TokenStream,
    config: &ScoringConfig,
) -> Result<Vec<LineEntropy>> {
    config.validate()?;
    if stream.is_empty() {
        return Err(Error::EmptyInput("scoring an empty stream".into()));
    }
    let n = stream.ids.len();
    let mut values = vec![0.0f64; n];
    // defined[t] is false only for the final position under cross-entropy.
    let mut defined = vec![true; n];
    let metric = config.metric;
    let ids = &stream.ids;
    model.scan(ids, &mut |t, dist| match metric {
        Metric::PredictiveEntropy => values[t] = char_entropy(dist),
        Metric::CrossEntropy => {
            if t + 1 < n {
                values[t] = -dist.prob(ids[t + 1]).log2();
            } else {
                defined[t] = false;
            }
        }
    })?;

    Ok(stream
        .line_spans
        .iter()
        .map(|span| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in span.start..span.end {
                if defined[t] {
                    sum += values[t];
                    count += 1;
                }
            }
            LineEntropy {
                line_number: span.line_number,
                value: if count > 0 { sum / count as f64 } else { 0.0 },
                char_count: span.end - span.start,
            }
        })
        .collect())
}

/// Elementwise convex combination `lambda * global + (1 - lambda) * local`.
pub fn mix_scores(
    global_scores: &[f64],
    local_scores: &[f64],
    config: &ScoringConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if global_scores.len() != local_scores.len() {
        return Err(Error::LengthMismatch {
            expected: global_scores.len(),
            got: local_scores.len(),
        });
    }
    let lam = config.lambda;
    Ok(global_scores
        .iter()
        .zip(local_scores)
        .map(|(&g, &l)| lam * g + (1.0 - lam) * l)
        .collect())
}

/// One row of the line-score report.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScore {
    pub file: String,
    /// 1-based.
    pub line_number: usize,
    pub h_global: f64,
    pub h_local: Option<f64>,
    pub h_total: f64,
    pub label: Option<LineLabel>,
    pub char_count: usize,
}

impl LineScore {
    pub fn label_str(&self) -> &'static str {
        match self.label {
            Some(l) => l.as_str(),
            None => "unlabeled",
        }
    }
}

pub const SCORE_CSV_HEADER: &str = "file,line,h_global,h_local,h_total,label,chars";

/// Render the score report; entropies printed with six decimal places.
pub fn score_csv(rows: &[LineScore]) -> String {
    let mut out = String::from(SCORE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let h_local = match r.h_local {
            Some(v) => format!("{v:.6}"),
            None => String::new(),
        };
        let mut line = String::new();
        csvio::push_row(
            &mut line,
            &[
                &r.file,
                &r.line_number.to_string(),
                &format!("{:.6}", r.h_global),
                &h_local,
                &format!("{:.6}", r.h_total),
                r.label_str(),
                &r.char_count.to_string(),
            ],
        );
        let _ = write!(out, "{line}");
    }
    out
}

pub fn write_score_csv(path: &Path, rows: &[LineScore]) -> Result<()> {
    std::fs::write(path, score_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Parse a score report produced by `score_csv`.
pub fn parse_score_csv(text: &str, source: &Path) -> Result<Vec<LineScore>> {
    let bad = |lineno: usize, message: String| Error::BadFormat {
        path: source.to_path_buf(),
        message: format!("line {lineno}: {message}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SCORE_CSV_HEADER => {}
        _ => {
            return Err(Error::BadFormat {
                path: source.to_path_buf(),
                message: format!("missing header `{SCORE_CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields = csvio::parse_row(line).map_err(|m| bad(lineno, m))?;
        if fields.len() != 7 {
            return Err(bad(lineno, format!("expected 7 fields, got {}", fields.len())));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| bad(lineno, format!("bad {what} `{s}`")))
        };
        let label = match fields[5].as_str() {
            "buggy" => Some(LineLabel::Buggy),
            "clean" => Some(LineLabel::Clean),
            "unlabeled" => None,
            other => return Err(bad(lineno, format!("bad label `{other}`"))),
        };
        rows.push(LineScore {
            file: fields[0].clone(),
            line_number: fields[1]
                .parse()
                .map_err(|_| bad(lineno, format!("bad line number `{}`", fields[1])))?,
            h_global: parse_f(&fields[2], "h_global")?,
            h_local: if fields[3].is_empty() {
                None
            } else {
                Some(parse_f(&fields[3], "h_local")?)
            },
            h_total: parse_f(&fields[4], "h_total")?,
            label,
            char_count: fields[6]
                .parse()
                .map_err(|_| bad(lineno, format!("bad char count `{}`", fields[6])))?,
        });
    }
    Ok(rows)
}

pub fn read_score_csv(path: &Path) -> Result<Vec<LineScore>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_score_csv(&text, path)
}

/// Entropy in nats instead of bits; the two differ by the constant ln 2,
/// which can never change a ranking.
pub fn bits_to_nats(bits: f64) -> f64 {
    bits * LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::lm::TokenId;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Emits a fixed cycle of distributions, position mod cycle length.
    struct FixedModel {
        dists: Vec<PredictiveDistribution>,
    }

    impl LanguageModel for FixedModel {
        fn vocab_size(&self) -> usize {
            self.dists[0].len()
        }

        fn scan(
            &self,
            ids: &[TokenId],
            visit: &mut dyn FnMut(usize, &PredictiveDistribution),
        ) -> Result<()> {
            for t in 0..ids.len() {
                visit(t, &self.dists[t % self.dists.len()]);
            }
            Ok(())
        }
    }

    fn fixed_model() -> FixedModel {
        FixedModel {
            dists: vec![
                PredictiveDistribution::from_probs(vec![0.25, 0.25, 0.25, 0.25]).unwrap(),
                PredictiveDistribution::from_probs(vec![0.5, 0.25, 0.125, 0.125]).unwrap(),
                PredictiveDistribution::from_probs(vec![0.5, 0.5, 0.0, 0.0]).unwrap(),
            ],
        }
    }

    #[test]
    fn entropy_of_uniform_four_is_two_bits() {
        let d = PredictiveDistribution::from_probs(vec![0.25; 4]).unwrap();
        assert_eq!(char_entropy(&d), 2.0);
    }

    #[test]
    fn entropy_of_one_hot_is_zero() {
        let d = PredictiveDistribution::from_probs(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(char_entropy(&d), 0.0);
    }

    #[test]
    fn entropy_hand_case() {
        let d = PredictiveDistribution::from_probs(vec![0.5, 0.25, 0.25]).unwrap();
        assert_relative_eq!(char_entropy(&d), 1.5, epsilon = 1e-15);
    }

    /// A model that always answers uniform over `n`.
    struct UniformModel {
        n: usize,
    }

    impl LanguageModel for UniformModel {
        fn vocab_size(&self) -> usize {
            self.n
        }
        fn scan(
            &self,
            ids: &[TokenId],
            visit: &mut dyn FnMut(usize, &PredictiveDistribution),
        ) -> Result<()> {
            let d = PredictiveDistribution::from_probs(vec![1.0 / self.n as f64; self.n]).unwrap();
            for t in 0..ids.len() {
                visit(t, &d);
            }
            Ok(())
        }
    }

    fn encode(text: &str) -> TokenStream {
        Vocabulary::from_bytes(text.as_bytes())
            .unwrap()
            .encode(text.as_bytes())
    }

    #[test]
    fn uniform_model_scores_log2_v_everywhere() {
        let stream = encode("abc\nde\nf\n");
        let model = UniformModel { n: 16 };
        let lines = score_file(&model, &stream, &ScoringConfig::default()).unwrap();
        assert_eq!(lines.len(), 3);
        for l in &lines {
            assert_eq!(l.value, 4.0);
        }
    }

    #[test]
    fn three_line_toy_matches_hand_computation() {
        // Spans [0,3), [3,5), [5,9); cycle entropies are 2, 1.75 and 1 bits.
        let stream = encode("ab\nc\nddd\n");
        assert_eq!(stream.ids.len(), 9);
        let lines = score_file(&fixed_model(), &stream, &ScoringConfig::default()).unwrap();
        assert_relative_eq!(lines[0].value, (2.0 + 1.75 + 1.0) / 3.0, epsilon = 1e-12);
        assert_relative_eq!(lines[1].value, (2.0 + 1.75) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(lines[2].value, (1.0 + 2.0 + 1.75 + 1.0) / 4.0, epsilon = 1e-12);
        assert_eq!(lines[0].char_count, 3);
        assert_eq!(lines[1].char_count, 2);
        assert_eq!(lines[2].char_count, 4);
    }

    #[test]
    fn single_line_score_is_mean_of_per_char_values() {
        let stream = encode("wxyz");
        let lines = score_file(&fixed_model(), &stream, &ScoringConfig::default()).unwrap();
        assert_eq!(lines.len(), 1);
        assert_relative_eq!(lines[0].value, (2.0 + 1.75 + 1.0 + 2.0) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_metric_skips_final_position() {
        // Vocabulary of "ab\n" is {\n: 0, a: 1, b: 2}; stream "ab\n" has ids
        // [1, 2, 0]. Under the fixed cycle the value at t is
        // -log2 p_t(ids[t+1]); the final position has no successor.
        let stream = encode("ab\n");
        let d = fixed_model();
        let cfg = ScoringConfig {
            metric: Metric::CrossEntropy,
            ..Default::default()
        };
        let lines = score_file(&d, &stream, &cfg).unwrap();
        let v0 = -(0.25f64).log2(); // p_0(b=2) = 0.25
        let v1 = -(0.5f64).log2(); // p_1(\n=0) = 0.5
        assert_eq!(lines.len(), 1);
        assert_relative_eq!(lines[0].value, (v0 + v1) / 2.0, epsilon = 1e-12);
        assert_eq!(lines[0].char_count, 3);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let stream = TokenStream {
            ids: Vec::new(),
            line_spans: Vec::new(),
        };
        assert!(matches!(
            score_file(&fixed_model(), &stream, &ScoringConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let g = [2.0, 4.0];
        let l = [1.0, 8.0];
        let mk = |lambda| ScoringConfig {
            lambda,
            ..Default::default()
        };
        assert_eq!(mix_scores(&g, &l, &mk(1.0)).unwrap(), vec![2.0, 4.0]);
        assert_eq!(mix_scores(&g, &l, &mk(0.0)).unwrap(), vec![1.0, 8.0]);
        assert_eq!(mix_scores(&[2.0], &[1.0], &mk(0.5)).unwrap(), vec![1.5]);
    }

    #[test]
    fn mix_rejects_length_mismatch() {
        assert!(matches!(
            mix_scores(&[1.0], &[1.0, 2.0], &ScoringConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn lambda_outside_unit_interval_is_rejected() {
        let cfg = ScoringConfig {
            lambda: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scoring_is_deterministic() {
        let stream = encode("some text\nmore text\n");
        let a = score_file(&fixed_model(), &stream, &ScoringConfig::default()).unwrap();
        let b = score_file(&fixed_model(), &stream, &ScoringConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn score_csv_round_trips() {
        let rows = vec![
            LineScore {
                file: "src/a,b.java".into(),
                line_number: 3,
                h_global: 1.25,
                h_local: Some(0.75),
                h_total: 1.0,
                label: Some(LineLabel::Buggy),
                char_count: 17,
            },
            LineScore {
                file: "plain.java".into(),
                line_number: 9,
                h_global: 2.0,
                h_local: None,
                h_total: 2.0,
                label: None,
                char_count: 4,
            },
        ];
        let text = score_csv(&rows);
        assert!(text.starts_with(SCORE_CSV_HEADER));
        assert!(text.contains("1.250000"));
        let parsed = parse_score_csv(&text, Path::new("test.csv")).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn score_csv_rejects_garbage() {
        assert!(parse_score_csv("nope\n", Path::new("x")).is_err());
        let bad = format!("{SCORE_CSV_HEADER}\nf,1,x,,1.0,buggy,3\n");
        assert!(parse_score_csv(&bad, Path::new("x")).is_err());
        let bad_label = format!("{SCORE_CSV_HEADER}\nf,1,1.0,,1.0,meh,3\n");
        assert!(parse_score_csv(&bad_label, Path::new("x")).is_err());
    }

    proptest! {
        #[test]
        fn mixing_is_monotone(
            g in proptest::collection::vec(0.0f64..8.0, 1..20),
            bump_idx in 0usize..20,
            bump in 0.0f64..4.0,
            lambda in 0.0f64..1.0,
        ) {
            let l: Vec<f64> = g.iter().map(|x| 8.0 - x).collect();
            let cfg = ScoringConfig { lambda, ..Default::default() };
            let base = mix_scores(&g, &l, &cfg).unwrap();
            let mut g2 = g.clone();
            let idx = bump_idx % g.len();
            g2[idx] += bump;
            let bumped = mix_scores(&g2, &l, &cfg).unwrap();
            for (a, b) in base.iter().zip(&bumped) {
                prop_assert!(b >= a);
            }
        }

        #[test]
        fn predictive_scores_stay_in_entropy_range(text in "[a-d\n]{1,120}") {
            let stream = encode(&text);
            if stream.is_empty() { return Ok(()); }
            let model = UniformModel { n: 8 };
            let lines = score_file(&model, &stream, &ScoringConfig::default()).unwrap();
            for l in lines {
                prop_assert!(l.value >= 0.0 && l.value <= 3.0 + 1e-12);
            }
        }
    }
}
