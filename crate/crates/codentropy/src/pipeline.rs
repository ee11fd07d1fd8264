//! End-to-end plumbing: role-specific training streams (with test-line
//! masking), model training and loading for both families, batch scoring of
//! target files against frozen models, and label joins for evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{self, FileKind};
use crate::corpus::{CorpusSplit, LineLabel, TokenStream, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::RocReport;
use crate::lm::{LanguageModel, PredictiveDistribution, TokenId};
use crate::ngram::NgramModel;
use crate::nn::{init_params, LstmParams, ModelConfig};
use crate::optim::{train, AdamConfig, TrainingLog};
use crate::scoring::{mix_scores, score_file, LineScore, ScoringConfig};
use crate::synth::{
    generate_corpus, inject_bugs, mutations_csv, BugInjection, GeneratorConfig,
};

/// Which half of the split a model trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Global,
    Local,
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Role::Global),
            "local" => Ok(Role::Local),
            other => Err(Error::InvalidConfig(format!(
                "unknown role `{other}` (expected global or local)"
            ))),
        }
    }
}

/// Either model family behind one scoring interface.
#[derive(Debug, Clone)]
pub enum Model {
    Lstm(LstmParams),
    Ngram(NgramModel),
}

impl LanguageModel for Model {
    fn vocab_size(&self) -> usize {
        match self {
            Model::Lstm(m) => m.vocab_size(),
            Model::Ngram(m) => m.vocab_size(),
        }
    }

    fn scan(
        &self,
        ids: &[TokenId],
        visit: &mut dyn FnMut(usize, &PredictiveDistribution),
    ) -> Result<()> {
        match self {
            Model::Lstm(m) => m.scan(ids, visit),
            Model::Ngram(m) => m.scan(ids, visit),
        }
    }
}

/// Load a checkpoint of either family, dispatching on the magic bytes.
pub fn load_model(path: &Path) -> Result<(Model, Vocabulary)> {
    match checkpoint::sniff_kind(path)? {
        FileKind::Lstm => {
            let (params, vocab) = checkpoint::load_lstm(path)?;
            Ok((Model::Lstm(params), vocab))
        }
        FileKind::Ngram => {
            let (model, vocab) = checkpoint::load_ngram(path)?;
            Ok((Model::Ngram(model), vocab))
        }
        FileKind::Vocab => Err(Error::BadFormat {
            path: path.to_path_buf(),
            message: "this is a vocabulary file, not a model checkpoint".into(),
        }),
    }
}

/// Vocabulary is always built from the global training files and reused by
/// every model, so global and local scores live on the same alphabet.
pub fn build_vocabulary(split: &CorpusSplit) -> Result<Vocabulary> {
    Vocabulary::build(&split.global_train)
}

/// Per-file training id streams for a role. Local streams have every labeled
/// test line spliced out, so tested lines never leak into training.
pub fn training_streams(
    split: &CorpusSplit,
    role: Role,
    vocab: &Vocabulary,
) -> Result<Vec<Vec<TokenId>>> {
    let (files, mask) = match role {
        Role::Global => (&split.global_train, BTreeMap::new()),
        Role::Local => (&split.local_train, split.labels_by_file()),
    };
    if files.is_empty() {
        return Err(Error::EmptyInput(format!(
            "manifest lists no {} files",
            match role {
                Role::Global => "global",
                Role::Local => "local",
            }
        )));
    }
    let empty = BTreeSet::new();
    let mut streams = Vec::with_capacity(files.len());
    for path in files {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        let stream = vocab.encode(&data);
        let excluded = mask.get(path.as_path()).unwrap_or(&empty);
        let ids = stream.masked_ids(excluded);
        if !ids.is_empty() {
            streams.push(ids);
        }
    }
    if streams.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(streams)
}

/// Train an LSTM on a role's concatenated stream.
pub fn train_lstm(
    split: &CorpusSplit,
    role: Role,
    vocab: &Vocabulary,
    model_config: &ModelConfig,
    adam_config: &AdamConfig,
) -> Result<(LstmParams, TrainingLog)> {
    if model_config.vocab_size != vocab.size() {
        return Err(Error::ShapeMismatch(format!(
            "model vocab_size {} does not match vocabulary size {}",
            model_config.vocab_size,
            vocab.size()
        )));
    }
    let streams = training_streams(split, role, vocab)?;
    let joined: Vec<TokenId> = streams.into_iter().flatten().collect();
    let mut params = init_params(model_config)?;
    let log = train(&mut params, &joined, adam_config)?;
    Ok((params, log))
}

/// Fit the n-gram baseline on a role's per-file streams.
pub fn fit_ngram(
    split: &CorpusSplit,
    role: Role,
    vocab: &Vocabulary,
    order: usize,
) -> Result<NgramModel> {
    let id_streams = training_streams(split, role, vocab)?;
    let streams: Vec<TokenStream> = id_streams
        .into_iter()
        .map(|ids| TokenStream {
            ids,
            line_spans: Vec::new(),
        })
        .collect();
    let refs: Vec<&TokenStream> = streams.iter().collect();
    NgramModel::fit(&refs, order, vocab.size())
}

/// Fixed group count for parallel file scoring; output order is by file.
const SCORE_GROUPS: usize = 4;

/// Score every line of every target file under the global model and, when
/// present, the local model, mixing per-line values into `h_total`. Labels
/// are joined from the split.
pub fn score_targets(
    global: &Model,
    local: Option<&Model>,
    vocab: &Vocabulary,
    targets: &[PathBuf],
    labels: &BTreeMap<(&Path, usize), LineLabel>,
    config: &ScoringConfig,
) -> Result<Vec<LineScore>> {
    config.validate()?;
    if targets.is_empty() {
        return Err(Error::EmptyInput("no target files to score".into()));
    }
    if global.vocab_size() != vocab.size() {
        return Err(Error::VocabMismatch);
    }
    if let Some(l) = local {
        if l.vocab_size() != vocab.size() {
            return Err(Error::VocabMismatch);
        }
    }

    let score_one = |path: &PathBuf| -> Result<Vec<LineScore>> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        let stream = vocab.encode(&data);
        if stream.is_empty() {
            return Ok(Vec::new());
        }
        let g_lines = score_file(global, &stream, config)?;
        let l_lines = match local {
            Some(model) => Some(score_file(model, &stream, config)?),
            None => None,
        };
        let g_vals: Vec<f64> = g_lines.iter().map(|l| l.value).collect();
        let totals: Vec<f64> = match &l_lines {
            Some(ll) => {
                let l_vals: Vec<f64> = ll.iter().map(|l| l.value).collect();
                mix_scores(&g_vals, &l_vals, config)?
            }
            None => g_vals.clone(),
        };
        Ok(g_lines
            .iter()
            .enumerate()
            .map(|(i, g)| LineScore {
                file: path.to_string_lossy().into_owned(),
                line_number: g.line_number,
                h_global: g.value,
                h_local: l_lines.as_ref().map(|ll| ll[i].value),
                h_total: totals[i],
                label: labels.get(&(path.as_path(), g.line_number)).copied(),
                char_count: g.char_count,
            })
            .collect())
    };

    let group_size = targets.len().div_ceil(SCORE_GROUPS);
    let mut grouped: Vec<Result<Vec<Vec<LineScore>>>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in targets.chunks(group_size) {
            handles.push(scope.spawn(move || chunk.iter().map(score_one).collect()));
        }
        for h in handles {
            grouped.push(h.join().expect("scoring worker panicked"));
        }
    });

    let mut rows = Vec::new();
    for group in grouped {
        for file_rows in group? {
            rows.extend(file_rows);
        }
    }
    Ok(rows)
}

/// Which entropy column of a score row to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreColumn {
    Global,
    Local,
    #[default]
    Total,
}

impl std::str::FromStr for ScoreColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h_global" => Ok(ScoreColumn::Global),
            "h_local" => Ok(ScoreColumn::Local),
            "h_total" => Ok(ScoreColumn::Total),
            other => Err(Error::InvalidConfig(format!(
                "unknown column `{other}` (expected h_global, h_local or h_total)"
            ))),
        }
    }
}

impl ScoreColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreColumn::Global => "h_global",
            ScoreColumn::Local => "h_local",
            ScoreColumn::Total => "h_total",
        }
    }
}

/// Extract (score, label) pairs for the labeled rows of a report column.
pub fn labeled_scores(rows: &[LineScore], column: ScoreColumn) -> Result<Vec<(f64, LineLabel)>> {
    let mut out = Vec::new();
    for r in rows {
        let Some(label) = r.label else { continue };
        let value = match column {
            ScoreColumn::Global => r.h_global,
            ScoreColumn::Total => r.h_total,
            ScoreColumn::Local => r.h_local.ok_or_else(|| {
                Error::InvalidConfig(
                    "score report has no h_local column to evaluate".into(),
                )
            })?,
        };
        out.push((value, label));
    }
    Ok(out)
}

/// Summarize one column of a score report against its labels.
pub fn evaluate(rows: &[LineScore], column: ScoreColumn) -> Result<RocReport> {
    crate::eval::summarize(&labeled_scores(rows, column)?)
}

/// Everything `synth` writes to disk.
#[derive(Debug)]
pub struct SynthOutput {
    pub manifest: PathBuf,
    pub mutations_log: PathBuf,
    pub n_global: usize,
    pub n_local: usize,
    pub injections: Vec<BugInjection>,
}

/// Generate a corpus under `out_dir` and inject bugs into its local half:
/// pristine files in `files/`, mutated local copies in `mutated/`, a split
/// manifest referencing the mutated locals, and the mutation log.
pub fn synthesize(
    out_dir: &Path,
    config: &GeneratorConfig,
    global_fraction: f64,
    bug_rate: f64,
) -> Result<SynthOutput> {
    let files_dir = out_dir.join("files");
    let corpus = generate_corpus(config, &files_dir, global_fraction)?;
    let mutated_dir = out_dir.join("mutated");
    let outcome = inject_bugs(
        &corpus.local_files,
        bug_rate,
        config.rng_seed.wrapping_add(1),
        &mutated_dir,
    )?;

    let split = CorpusSplit {
        global_train: corpus.global_files.clone(),
        local_train: outcome.mutated_files.clone(),
        test_lines: outcome.labels.clone(),
    };
    let manifest = out_dir.join("manifest.txt");
    fs::write(&manifest, crate::corpus::manifest_text(&split, out_dir))
        .map_err(|e| Error::io(&manifest, e))?;
    let mutations_log = out_dir.join("mutations.csv");
    fs::write(&mutations_log, mutations_csv(&outcome.injections))
        .map_err(|e| Error::io(&mutations_log, e))?;

    Ok(SynthOutput {
        manifest,
        mutations_log,
        n_global: corpus.global_files.len(),
        n_local: outcome.mutated_files.len(),
        injections: outcome.injections,
    })
}
