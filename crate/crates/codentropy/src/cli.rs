//! Command-line front end: one binary, five subcommands covering the whole
//! pipeline (synth, build-vocab, train, score, eval).
//!
//! Every option can also come from a `key=value` config file (`--config`),
//! keyed by the long flag name; explicit flags win. All validation runs
//! before any work starts; each violation prints one line and the process
//! exits 2. Runtime failures exit 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::checkpoint;
use crate::corpus::{load_split, CorpusSplit};
use crate::error::{Error, Result};
use crate::eval::{render_table, write_roc_csv, RocReport};
use crate::ngram::NgramModel;
use crate::nn::ModelConfig;
use crate::optim::AdamConfig;
use crate::pipeline::{
    self, evaluate, fit_ngram, load_model, score_targets, train_lstm, Role, ScoreColumn,
};
use crate::scoring::{read_score_csv, write_score_csv, Metric, ScoringConfig};
use crate::synth::GeneratorConfig;

/// Failure classes mapped to exit codes: usage errors exit 2, runtime
/// errors exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(Vec<String>),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "codentropy",
    about = "Character-level language models for entropy-based buggy-line ranking",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus with injected bugs and a split manifest.
    Synth(SynthArgs),
    /// Build the byte vocabulary from a manifest's global files.
    BuildVocab(BuildVocabArgs),
    /// Train a model (lstm or ngram) on the global or local split.
    Train(TrainArgs),
    /// Score target files line by line under one or two checkpoints.
    Score(ScoreArgs),
    /// Evaluate score reports: AUC, ROC and class-conditional means.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    /// Output directory for the corpus, manifest and mutation log.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for generation (injection derives its own from it).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of files to generate.
    #[arg(long)]
    pub files: Option<usize>,
    #[arg(long)]
    pub min_funcs: Option<usize>,
    #[arg(long)]
    pub max_funcs: Option<usize>,
    /// Identifier pool size shared across the corpus.
    #[arg(long)]
    pub ident_pool: Option<usize>,
    /// Maximum statement nesting depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Fraction of eligible lines to mutate, in (0, 1).
    #[arg(long)]
    pub bug_rate: Option<f64>,
    /// Fraction of files assigned to the global split, in (0, 1).
    #[arg(long)]
    pub global_frac: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct BuildVocabArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output vocabulary file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Which split to train on: global or local.
    #[arg(long)]
    pub role: Option<String>,
    /// Model family: lstm or ngram.
    #[arg(long)]
    pub family: Option<String>,
    /// Vocabulary file produced by build-vocab.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub bptt: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    /// n-gram order (ngram family only).
    #[arg(long)]
    pub order: Option<usize>,
    /// Optional training-log CSV path (lstm family).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct ScoreArgs {
    /// Global model checkpoint (required).
    #[arg(long)]
    pub global: Option<PathBuf>,
    /// Local model checkpoint (optional).
    #[arg(long)]
    pub local: Option<PathBuf>,
    /// Manifest supplying labels and, when no files are given, the target set.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Mixture weight for the global score, in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Metric: predictive_entropy or cross_entropy.
    #[arg(long)]
    pub metric: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Target files; defaults to the manifest's local files.
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    /// Score CSVs to evaluate (each gets one report row).
    pub scores: Vec<PathBuf>,
    /// Column to rank by: h_global, h_local or h_total.
    #[arg(long)]
    pub column: Option<String>,
    /// Write the report(s) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Dump ROC points as CSV (single input only).
    #[arg(long)]
    pub roc_csv: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// `key=value` file, keys matching the long flag names. Blank lines and
/// `#` comments are ignored.
fn load_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(Error::io(path, e)))?;
    let mut map = BTreeMap::new();
    let mut violations = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => violations.push(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                i + 1
            )),
        }
    }
    if violations.is_empty() {
        Ok(map)
    } else {
        Err(CliError::Usage(violations))
    }
}

/// Flag-beats-config resolution of one option.
struct Resolver {
    map: BTreeMap<String, String>,
    violations: Vec<String>,
}

impl Resolver {
    fn new(config: Option<&PathBuf>) -> CliResult<Self> {
        let map = match config {
            Some(p) => load_config_file(p)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            map,
            violations: Vec::new(),
        })
    }

    fn get<T: FromStr>(&mut self, flag: Option<T>, key: &str, default: T) -> T {
        self.opt(flag, key).unwrap_or(default)
    }

    fn opt<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Option<T> {
        if flag.is_some() {
            return flag;
        }
        match self.map.get(key) {
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.violations
                        .push(format!("config key `{key}`: cannot parse `{raw}`"));
                    None
                }
            },
            None => None,
        }
    }

    fn require<T: FromStr>(&mut self, flag: Option<T>, key: &str) -> Option<T> {
        let v = self.opt(flag, key);
        if v.is_none() && !self.violations.iter().any(|m| m.contains(&format!("`{key}`"))) {
            self.violations.push(format!("missing required option --{key}"));
        }
        v
    }

    fn check(&mut self, ok: bool, message: &str) {
        if !ok {
            self.violations.push(message.to_string());
        }
    }

    fn finish(self) -> CliResult<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(self.violations))
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::BuildVocab(args) => cmd_build_vocab(args),
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_ref())?;
    let out = r.require(args.out, "out");
    let seed = r.get(args.seed, "seed", 0);
    let files = r.get(args.files, "files", 50);
    let min_funcs = r.get(args.min_funcs, "min-funcs", 2);
    let max_funcs = r.get(args.max_funcs, "max-funcs", 5);
    let ident_pool = r.get(args.ident_pool, "ident-pool", 12);
    let depth = r.get(args.depth, "depth", 2);
    let bug_rate = r.get(args.bug_rate, "bug-rate", 0.05);
    let global_frac = r.get(args.global_frac, "global-frac", 0.7);

    let config = GeneratorConfig {
        rng_seed: seed,
        n_files: files,
        functions_per_file: (min_funcs, max_funcs),
        identifier_pool_size: ident_pool,
        statement_depth: depth,
    };
    r.check(config.validate().is_ok(), &describe(config.validate()));
    r.check(
        0.0 < bug_rate && bug_rate < 1.0,
        "bug-rate must be in (0, 1)",
    );
    r.check(
        0.0 < global_frac && global_frac < 1.0,
        "global-frac must be in (0, 1)",
    );
    r.finish()?;
    let out = out.expect("validated");

    let result = pipeline::synthesize(&out, &config, global_frac, bug_rate)?;
    println!(
        "wrote {} global + {} local files, {} injected bugs",
        result.n_global,
        result.n_local,
        result.injections.len()
    );
    println!("manifest: {}", result.manifest.display());
    println!("mutations: {}", result.mutations_log.display());
    Ok(())
}

fn describe(r: Result<()>) -> String {
    match r {
        Ok(()) => String::new(),
        Err(e) => e.to_string(),
    }
}

fn load_split_arg(manifest: &Path) -> CliResult<CorpusSplit> {
    Ok(load_split(manifest)?)
}

fn cmd_build_vocab(args: BuildVocabArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_ref())?;
    let manifest = r.require(args.manifest, "manifest");
    let out = r.require(args.out, "out");
    r.finish()?;
    let (manifest, out) = (manifest.expect("validated"), out.expect("validated"));

    let split = load_split_arg(&manifest)?;
    let vocab = pipeline::build_vocabulary(&split)?;
    checkpoint::save_vocab(&out, &vocab)?;
    println!(
        "vocabulary: {} tokens ({} bytes + unk) -> {}",
        vocab.size(),
        vocab.size() - 1,
        out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_ref())?;
    let manifest = r.require(args.manifest, "manifest");
    let role_str: Option<String> = r.require(args.role, "role");
    let family: Option<String> = r.require(args.family, "family");
    let vocab_path = r.require(args.vocab, "vocab");
    let out = r.require(args.out, "out");
    let seed = r.get(args.seed, "seed", 0);
    let embed_dim = r.get(args.embed_dim, "embed-dim", 64);
    let hidden_dim = r.get(args.hidden_dim, "hidden-dim", 128);
    let layers = r.get(args.layers, "layers", 2);
    let bptt = r.get(args.bptt, "bptt", 50);
    let batch_size = r.get(args.batch_size, "batch-size", 128);
    let max_steps = r.get(args.max_steps, "max-steps", 500);
    let alpha = r.get(args.alpha, "alpha", 1e-3);
    let beta1 = r.get(args.beta1, "beta1", 0.9);
    let beta2 = r.get(args.beta2, "beta2", 0.999);
    let eps = r.get(args.eps, "eps", 1e-8);
    let clip = r.get(args.clip, "clip", 5.0);
    let order = r.get(args.order, "order", 5);
    let log_path = r.opt(args.log, "log");

    let role = match role_str.as_deref() {
        Some(s) => match Role::from_str(s) {
            Ok(role) => Some(role),
            Err(e) => {
                r.check(false, &e.to_string());
                None
            }
        },
        None => None,
    };
    match family.as_deref() {
        Some("lstm") | Some("ngram") | None => {}
        Some(other) => r.check(false, &format!("unknown family `{other}` (expected lstm or ngram)")),
    }
    let adam = AdamConfig {
        alpha,
        beta1,
        beta2,
        eps,
        batch_size,
        max_steps,
        clip_norm: clip,
    };
    r.check(adam.validate().is_ok(), &describe(adam.validate()));
    r.check(order >= 1, "order must be >= 1");
    r.finish()?;
    let (manifest, vocab_path, out) = (
        manifest.expect("validated"),
        vocab_path.expect("validated"),
        out.expect("validated"),
    );
    let role = role.expect("validated");
    let family = family.expect("validated");

    let split = load_split_arg(&manifest)?;
    let vocab = checkpoint::load_vocab(&vocab_path)?;
    match family.as_str() {
        "lstm" => {
            let model_config = ModelConfig {
                vocab_size: vocab.size(),
                embed_dim,
                hidden_dim,
                num_layers: layers,
                bptt_len: bptt,
                rng_seed: seed,
            };
            model_config
                .validate()
                .map_err(|e| CliError::Usage(vec![e.to_string()]))?;
            let (params, log) = train_lstm(&split, role, &vocab, &model_config, &adam)?;
            for w in &log.warnings {
                eprintln!("warning: {w}");
            }
            checkpoint::save_lstm(&out, &params, &vocab)?;
            if let Some(p) = log_path {
                log.write_csv(&p)?;
            }
            println!(
                "trained lstm ({} steps), final cross-entropy {:.4} bits -> {}",
                log.entries.len(),
                log.final_cross_entropy_bits().unwrap_or(f64::NAN),
                out.display()
            );
        }
        "ngram" => {
            let model: NgramModel = fit_ngram(&split, role, &vocab, order)?;
            checkpoint::save_ngram(&out, &model, &vocab)?;
            println!(
                "fit order-{} n-gram ({} contexts) -> {}",
                model.order(),
                model.context_total(),
                out.display()
            );
        }
        _ => unreachable!("validated"),
    }
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_ref())?;
    let global_path = r.require(args.global, "global");
    let local_path = r.opt(args.local, "local");
    let manifest = r.opt(args.manifest, "manifest");
    let lambda = r.get(args.lambda, "lambda", 0.5);
    let metric_str: String = r.get(args.metric, "metric", "predictive_entropy".to_string());
    let out = r.require(args.out, "out");

    let metric = match Metric::from_str(&metric_str) {
        Ok(m) => Some(m),
        Err(e) => {
            r.check(false, &e.to_string());
            None
        }
    };
    let scoring = ScoringConfig {
        lambda,
        metric: metric.unwrap_or_default(),
    };
    r.check(scoring.validate().is_ok(), &describe(scoring.validate()));
    r.check(
        manifest.is_some() || !args.files.is_empty(),
        "need target files or --manifest",
    );
    r.finish()?;
    let (global_path, out) = (global_path.expect("validated"), out.expect("validated"));

    let (global, g_vocab) = load_model(&global_path)?;
    let local = match &local_path {
        Some(p) => {
            let (model, l_vocab) = load_model(p)?;
            if l_vocab != g_vocab {
                return Err(CliError::Runtime(Error::VocabMismatch));
            }
            Some(model)
        }
        None => None,
    };

    let split = match &manifest {
        Some(m) => Some(load_split_arg(m)?),
        None => None,
    };
    let targets: Vec<PathBuf> = if args.files.is_empty() {
        split
            .as_ref()
            .map(|s| s.local_train.clone())
            .unwrap_or_default()
    } else {
        args.files.clone()
    };
    let labels = split.as_ref().map(|s| s.label_map()).unwrap_or_default();

    let rows = score_targets(
        &global,
        local.as_ref(),
        &g_vocab,
        &targets,
        &labels,
        &scoring,
    )?;
    write_score_csv(&out, &rows)?;
    println!(
        "scored {} lines across {} files -> {}",
        rows.len(),
        targets.len(),
        out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct NamedReport<'a> {
    source: &'a str,
    #[serde(flatten)]
    report: &'a RocReport,
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let mut r = Resolver::new(args.config.as_ref())?;
    let column_str: String = r.get(args.column, "column", "h_total".to_string());
    let column = match ScoreColumn::from_str(&column_str) {
        Ok(c) => Some(c),
        Err(e) => {
            r.check(false, &e.to_string());
            None
        }
    };
    r.check(!args.scores.is_empty(), "need at least one score CSV");
    r.check(
        args.roc_csv.is_none() || args.scores.len() == 1,
        "--roc-csv needs exactly one score CSV",
    );
    r.finish()?;
    let column = column.expect("validated");

    let mut named: Vec<(String, RocReport)> = Vec::new();
    for path in &args.scores {
        let rows = read_score_csv(path)?;
        let report = evaluate(&rows, column)?;
        named.push((path.display().to_string(), report));
    }

    print!("{}", render_table(&named));
    if let Some(json_path) = &args.json {
        let payload: Vec<NamedReport> = named
            .iter()
            .map(|(source, report)| NamedReport { source, report })
            .collect();
        let text = serde_json::to_string_pretty(&payload)
            .map_err(|e| CliError::Runtime(Error::Other(e.to_string())))?;
        std::fs::write(json_path, text).map_err(|e| CliError::Runtime(Error::io(json_path, e)))?;
    }
    if let Some(roc_path) = &args.roc_csv {
        write_roc_csv(roc_path, &named[0].1)?;
    }
    let mut summary = String::new();
    for (source, report) in &named {
        let _ = writeln!(
            summary,
            "{source}: auc {:.4}, gap {:+.6} bits",
            report.auc, report.entropy_gap
        );
    }
    print!("{summary}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_fills_gaps_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "# comment\nfiles=9\nseed=4\n").unwrap();
        let mut r = Resolver::new(Some(&cfg)).unwrap();
        // Flag wins over config.
        assert_eq!(r.get(Some(2u64), "seed", 0), 2);
        // Config fills a missing flag.
        assert_eq!(r.get(None::<usize>, "files", 50), 9);
        // Default when neither is present.
        assert_eq!(r.get(None::<usize>, "depth", 3), 3);
        r.finish().unwrap();
    }

    #[test]
    fn bad_config_values_are_collected_as_violations() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "files=notanumber\n").unwrap();
        let mut r = Resolver::new(Some(&cfg)).unwrap();
        let _ = r.get(None::<usize>, "files", 50);
        match r.finish() {
            Err(CliError::Usage(v)) => assert_eq!(v.len(), 1),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_config_lines_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "this is not a pair\n").unwrap();
        assert!(matches!(
            Resolver::new(Some(&cfg)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn missing_required_options_are_reported_once_each() {
        let mut r = Resolver::new(None).unwrap();
        let out: Option<PathBuf> = r.require(None, "out");
        let manifest: Option<PathBuf> = r.require(None, "manifest");
        assert!(out.is_none() && manifest.is_none());
        match r.finish() {
            Err(CliError::Usage(v)) => {
                assert_eq!(v.len(), 2);
                assert!(v[0].contains("--out"));
                assert!(v[1].contains("--manifest"));
            }
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn synth_requires_out() {
        let err = cmd_synth(SynthArgs::default());
        assert!(matches!(err, Err(CliError::Usage(_))));
    }

    #[test]
    fn eval_rejects_roc_csv_with_multiple_inputs() {
        let args = EvalArgs {
            scores: vec![PathBuf::from("a.csv"), PathBuf::from("b.csv")],
            roc_csv: Some(PathBuf::from("roc.csv")),
            ..Default::default()
        };
        assert!(matches!(cmd_eval(args), Err(CliError::Usage(_))));
    }
}
