//! Deterministic synthetic code-corpus generator and line-level bug
//! injector, so the full experiment runs at desk scale with known labels.
//!
//! The generator emits syntactically regular pseudo-Java from a small fixed
//! grammar: a class wrapper, typed functions, declarations, assignments and
//! nested if/for blocks with consistent 4-space indentation and locally
//! reused identifiers. The injector mutates single lines (wrong identifier,
//! flipped operator, off-by-one literal, dropped token) and emits balanced
//! buggy/clean labels over eligible lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabeledLine, LineLabel};
use crate::csvio;
use crate::error::{Error, Result};

/// Shape of the generated corpus.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub rng_seed: u64,
    pub n_files: usize,
    /// Inclusive (min, max) functions per file.
    pub functions_per_file: (usize, usize),
    pub identifier_pool_size: usize,
    pub statement_depth: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            n_files: 50,
            functions_per_file: (2, 5),
            identifier_pool_size: 12,
            statement_depth: 2,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.functions_per_file;
        for (name, v) in [
            ("n_files", self.n_files),
            ("functions_per_file min", lo),
            ("functions_per_file max", hi),
            ("identifier_pool_size", self.identifier_pool_size),
            ("statement_depth", self.statement_depth),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if lo > hi {
            return Err(Error::InvalidConfig(
                "functions_per_file min exceeds max".into(),
            ));
        }
        Ok(())
    }
}

const BASE_WORDS: [&str; 20] = [
    "count", "total", "index", "value", "limit", "offset", "size", "sum", "delta", "flag",
    "width", "depth", "result", "item", "step", "base", "code", "rank", "mask", "span",
];

/// Deterministic identifier pool of the requested size.
pub fn identifier_pool(size: usize) -> Vec<String> {
    (0..size)
        .map(|i| {
            let word = BASE_WORDS[i % BASE_WORDS.len()];
            if i < BASE_WORDS.len() {
                word.to_string()
            } else {
                format!("{word}{}", i / BASE_WORDS.len())
            }
        })
        .collect()
}

struct FileGen {
    rng: ChaCha8Rng,
    /// This file's identifier dialect: a subset of the shared pool, so
    /// files develop local naming habits a local model can pick up.
    pool: Vec<String>,
    depth_limit: usize,
    out: String,
}

impl FileGen {
    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn pick(&mut self, items: &[String]) -> String {
        items[self.rng.gen_range(0..items.len())].clone()
    }

    /// A scope member different from `a` when the scope allows it.
    fn pick_other(&mut self, scope: &[String], a: &str) -> String {
        let others: Vec<String> = scope.iter().filter(|w| *w != a).cloned().collect();
        if others.is_empty() {
            a.to_string()
        } else {
            others[self.rng.gen_range(0..others.len())].clone()
        }
    }

    fn expr(&mut self, scope: &[String]) -> String {
        let a = self.pick(scope);
        match self.rng.gen_range(0..4) {
            0 => a,
            1 => format!("{a} {} {}", ["+", "-", "*"][self.rng.gen_range(0..3)], self.rng.gen_range(1..10)),
            2 => {
                let b = self.pick_other(scope, &a);
                format!("{a} {} {b}", ["+", "-", "*"][self.rng.gen_range(0..3)])
            }
            _ => {
                let b = self.pick_other(scope, &a);
                let c = self.rng.gen_range(1..10);
                format!("{a} {} {b} {} {c}", ["+", "-"][self.rng.gen_range(0..2)], ["+", "*"][self.rng.gen_range(0..2)])
            }
        }
    }

    fn condition(&mut self, scope: &[String]) -> String {
        let a = self.pick(scope);
        let op = ["<", ">", "<=", ">=", "=="][self.rng.gen_range(0..5)];
        if self.rng.gen_bool(0.5) {
            format!("{a} {op} {}", self.rng.gen_range(0..100))
        } else {
            let b = self.pick_other(scope, &a);
            format!("{a} {op} {b}")
        }
    }

    /// Declare a new local, preferring an unused dialect name. The
    /// initializer is built from the scope as it was before the declaration.
    fn declaration(&mut self, scope: &mut Vec<String>) -> String {
        let e = self.expr(scope);
        let unused: Vec<String> = self
            .pool
            .iter()
            .filter(|w| !scope.contains(w))
            .cloned()
            .collect();
        let name = if unused.is_empty() {
            self.pick(scope)
        } else {
            unused[self.rng.gen_range(0..unused.len())].clone()
        };
        if !scope.contains(&name) {
            scope.push(name.clone());
        }
        format!("int {name} = {e};")
    }

    fn block(&mut self, indent: usize, depth: usize, scope: &mut Vec<String>) {
        let n = self.rng.gen_range(2..=4);
        for _ in 0..n {
            self.statement(indent, depth, scope);
        }
    }

    /// Update statements lean on the `x = x op ...` idiom: the repeated
    /// identifier is a within-line dependency longer than a few characters,
    /// the kind of regularity a recurrent model can exploit and an
    /// identifier swap silently breaks.
    fn assignment(&mut self, scope: &[String]) -> String {
        let a = self.pick(scope);
        match self.rng.gen_range(0..5) {
            0 | 1 => format!("{a} = {a} + {};", self.rng.gen_range(1..10)),
            2 => {
                let b = self.pick_other(scope, &a);
                format!("{a} = {a} {} {b};", ["+", "-", "*"][self.rng.gen_range(0..3)])
            }
            3 => {
                let b = self.pick_other(scope, &a);
                format!("{a} = {b};")
            }
            _ => {
                let e = self.expr(scope);
                format!("{a} = {e};")
            }
        }
    }

    fn statement(&mut self, indent: usize, depth: usize, scope: &mut Vec<String>) {
        let can_nest = depth < self.depth_limit;
        let kind = if can_nest {
            self.rng.gen_range(0..6)
        } else {
            self.rng.gen_range(0..4)
        };
        match kind {
            0 => {
                let decl = self.declaration(scope);
                self.line(indent, &decl);
            }
            1..=3 => {
                let stmt = self.assignment(scope);
                self.line(indent, &stmt);
            }
            4 => {
                let cond = self.condition(scope);
                self.line(indent, &format!("if ({cond}) {{"));
                let mut inner = scope.clone();
                self.block(indent + 1, depth + 1, &mut inner);
                self.line(indent, "}");
            }
            _ => {
                let bound = self.pick(scope);
                let acc = self.pick_other(scope, &bound);
                self.line(indent, &format!("for (int k = 0; k < {bound}; k = k + 1) {{"));
                let mut inner = scope.clone();
                inner.push("k".to_string());
                // Loop bodies favor the accumulate idiom.
                self.line(indent + 1, &format!("{acc} = {acc} + k;"));
                if self.rng.gen_bool(0.6) {
                    self.block(indent + 1, depth + 1, &mut inner);
                }
                self.line(indent, "}");
            }
        }
    }

    fn function(&mut self, name: &str) {
        let p0 = self.pick(&self.pool.clone());
        let p1 = self.pick_other(&self.pool.clone(), &p0);
        self.line(1, &format!("public static int {name}(int {p0}, int {p1}) {{"));
        let mut scope = vec![p0, p1];
        self.block(2, 1, &mut scope);
        let ret = self.pick(&scope);
        self.line(2, &format!("return {ret};"));
        self.line(1, "}");
    }
}

/// Render one file's text from its derived seed.
fn generate_file(class_name: &str, seed: u64, cfg: &GeneratorConfig, pool: &[String]) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dialect_size = pool.len().min(4 + rng.gen_range(0..=2));
    let mut dialect: Vec<String> = pool.to_vec();
    dialect.shuffle(&mut rng);
    dialect.truncate(dialect_size.max(2));
    let mut g = FileGen {
        rng,
        pool: dialect,
        depth_limit: cfg.statement_depth,
        out: String::new(),
    };
    g.line(0, &format!("public class {class_name} {{"));
    let (lo, hi) = cfg.functions_per_file;
    let n_funcs = g.rng.gen_range(lo..=hi);
    for i in 0..n_funcs {
        let fname = format!("{}{}", ["compute", "update", "resolve", "apply"][i % 4], i);
        g.function(&fname);
        if i + 1 < n_funcs {
            g.line(0, "");
        }
    }
    g.line(0, "}");
    g.out
}

/// Generated file paths, split global/local by the fixed ratio.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub global_files: Vec<PathBuf>,
    pub local_files: Vec<PathBuf>,
}

/// Write `n_files` generated files under `dir` and split them
/// global/local by `global_fraction` (global first).
pub fn generate_corpus(
    config: &GeneratorConfig,
    dir: &Path,
    global_fraction: f64,
) -> Result<GeneratedCorpus> {
    config.validate()?;
    if !(0.0 < global_fraction && global_fraction < 1.0) {
        return Err(Error::InvalidConfig(
            "global fraction must be in (0, 1)".into(),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pool = identifier_pool(config.identifier_pool_size);
    let mut master = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let seeds: Vec<u64> = (0..config.n_files).map(|_| master.gen()).collect();

    let mut paths = Vec::with_capacity(config.n_files);
    for (i, &seed) in seeds.iter().enumerate() {
        let class_name = format!("File{i:04}");
        let text = generate_file(&class_name, seed, config, &pool);
        let path = dir.join(format!("f{i:04}.java"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }

    let n_global = ((config.n_files as f64 * global_fraction).round() as usize)
        .clamp(1, config.n_files.saturating_sub(1).max(1));
    let local_files = paths.split_off(n_global.min(paths.len()));
    Ok(GeneratedCorpus {
        global_files: paths,
        local_files,
    })
}

/// One injected fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BugInjection {
    pub file: PathBuf,
    /// 1-based.
    pub line_number: usize,
    pub mutation: MutationKind,
    pub original_line: String,
    pub mutated_line: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    IdentifierSwap,
    OperatorSwap,
    LiteralOffset,
    TokenDeletion,
}

impl MutationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::IdentifierSwap => "identifier_swap",
            MutationKind::OperatorSwap => "operator_swap",
            MutationKind::LiteralOffset => "literal_offset",
            MutationKind::TokenDeletion => "token_deletion",
        }
    }
}

/// (byte offset, text) of identifier-shaped tokens.
fn identifiers_in(line: &str) -> Vec<(usize, String)> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, line[start..i].to_string()));
        } else {
            i += 1;
        }
    }
    out
}

/// (byte offset, digits) of integer literals.
fn literals_in(line: &str) -> Vec<(usize, String)> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            out.push((start, line[start..i].to_string()));
        } else {
            i += 1;
        }
    }
    out
}

const OP_SWAPS: [(&str, &str); 9] = [
    ("<=", ">="),
    (">=", "<="),
    ("==", "!="),
    ("!=", "=="),
    ("<", ">"),
    (">", "<"),
    ("+", "-"),
    ("-", "+"),
    ("*", "+"),
];

/// (byte offset, from, to) for every swappable operator occurrence,
/// longest-match first so `<` never fires inside `<=`.
fn operators_in(line: &str) -> Vec<(usize, &'static str, &'static str)> {
    let mut out = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &line[i..];
        let mut matched = 0;
        for &(from, to) in &OP_SWAPS {
            if rest.starts_with(from) {
                // Reject bare '<'/'>' followed by '=', and '=' pairs handled above.
                out.push((i, from, to));
                matched = from.len();
                break;
            }
        }
        i += matched.max(1);
    }
    out
}

fn applicable_mutations(line: &str, pool: &[String]) -> Vec<MutationKind> {
    let mut kinds = Vec::new();
    let idents = identifiers_in(line);
    if pool.len() >= 2 && idents.iter().any(|(_, name)| pool.contains(name)) {
        kinds.push(MutationKind::IdentifierSwap);
    }
    if !operators_in(line).is_empty() {
        kinds.push(MutationKind::OperatorSwap);
    }
    if !literals_in(line).is_empty() {
        kinds.push(MutationKind::LiteralOffset);
    }
    // Deleting a token needs at least two so the line stays non-blank.
    let token_count = identifiers_in(line).len() + literals_in(line).len();
    if token_count >= 2 {
        kinds.push(MutationKind::TokenDeletion);
    }
    kinds
}

fn apply_mutation(
    line: &str,
    kind: MutationKind,
    pool: &[String],
    rng: &mut ChaCha8Rng,
) -> Option<String> {
    match kind {
        MutationKind::IdentifierSwap => {
            let targets: Vec<(usize, String)> = identifiers_in(line)
                .into_iter()
                .filter(|(_, name)| pool.contains(name))
                .collect();
            let (offset, name) = targets.get(rng.gen_range(0..targets.len().max(1)))?.clone();
            let others: Vec<&String> = pool.iter().filter(|w| **w != name).collect();
            if others.is_empty() {
                return None;
            }
            let replacement = others[rng.gen_range(0..others.len())];
            let mut out = String::with_capacity(line.len());
            out.push_str(&line[..offset]);
            out.push_str(replacement);
            out.push_str(&line[offset + name.len()..]);
            Some(out)
        }
        MutationKind::OperatorSwap => {
            let ops = operators_in(line);
            let &(offset, from, to) = ops.get(rng.gen_range(0..ops.len().max(1)))?;
            let mut out = String::with_capacity(line.len());
            out.push_str(&line[..offset]);
            out.push_str(to);
            out.push_str(&line[offset + from.len()..]);
            Some(out)
        }
        MutationKind::LiteralOffset => {
            let lits = literals_in(line);
            let (offset, digits) = lits.get(rng.gen_range(0..lits.len().max(1)))?.clone();
            let value: i64 = digits.parse().ok()?;
            let delta = if value == 0 || rng.gen_bool(0.5) { 1 } else { -1 };
            let mut out = String::with_capacity(line.len() + 1);
            out.push_str(&line[..offset]);
            let _ = write!(out, "{}", value + delta);
            out.push_str(&line[offset + digits.len()..]);
            Some(out)
        }
        MutationKind::TokenDeletion => {
            let mut tokens = identifiers_in(line);
            tokens.extend(literals_in(line));
            tokens.sort();
            if tokens.len() < 2 {
                return None;
            }
            let (offset, text) = tokens[rng.gen_range(0..tokens.len())].clone();
            let mut end = offset + text.len();
            // Swallow one following space so the line stays tidy.
            if line[end..].starts_with(' ') {
                end += 1;
            }
            let mut out = String::with_capacity(line.len());
            out.push_str(&line[..offset]);
            out.push_str(&line[end..]);
            Some(out)
        }
    }
}

fn is_eligible(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && !t.chars().all(|c| "{};".contains(c))
}

/// Result of an injection run.
#[derive(Debug, Clone)]
pub struct InjectionOutcome {
    /// Mutated copies, one per input file, in input order.
    pub mutated_files: Vec<PathBuf>,
    pub injections: Vec<BugInjection>,
    /// Balanced labels over the mutated files.
    pub labels: Vec<LabeledLine>,
}

/// Mutate lines of `files` at the given rate, writing mutated copies into
/// `out_dir` and returning balanced buggy/clean labels.
///
/// Lines must be non-blank, not brace-only and admit at least one mutation
/// to be eligible. Every selected line receives exactly one uniformly chosen
/// applicable mutation; an equal-count sample of untouched eligible lines is
/// labeled clean.
pub fn inject_bugs(
    files: &[PathBuf],
    rate: f64,
    rng_seed: u64,
    out_dir: &Path,
) -> Result<InjectionOutcome> {
    if !(0.0 < rate && rate < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bug rate must be in (0, 1), got {rate}"
        )));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = identifier_pool(BASE_WORDS.len());

    let mut file_lines: Vec<Vec<String>> = Vec::with_capacity(files.len());
    let mut eligible: Vec<(usize, usize)> = Vec::new();
    for (fi, path) in files.iter().enumerate() {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = text.split_inclusive('\n').map(|s| s.to_string()).collect();
        for (li, raw) in lines.iter().enumerate() {
            let line = raw.trim_end_matches('\n');
            if is_eligible(line) && !applicable_mutations(line, &pool).is_empty() {
                eligible.push((fi, li));
            }
        }
        file_lines.push(lines);
    }
    if eligible.is_empty() {
        return Err(Error::EmptyInput("no lines eligible for mutation".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    eligible.shuffle(&mut rng);
    let n_mut = ((rate * eligible.len() as f64).round() as usize)
        .max(1)
        .min(eligible.len() / 2);
    if n_mut == 0 {
        return Err(Error::EmptyInput(
            "too few eligible lines to balance labels".into(),
        ));
    }

    let mut injections = Vec::with_capacity(n_mut);
    for &(fi, li) in &eligible[..n_mut] {
        let raw = file_lines[fi][li].clone();
        let (line, newline) = match raw.strip_suffix('\n') {
            Some(s) => (s.to_string(), true),
            None => (raw.clone(), false),
        };
        let kinds = applicable_mutations(&line, &pool);
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let mutated = apply_mutation(&line, kind, &pool, &mut rng)
            .filter(|m| *m != line)
            .ok_or_else(|| Error::Other(format!("mutation failed on line: {line}")))?;
        file_lines[fi][li] = if newline {
            format!("{mutated}\n")
        } else {
            mutated.clone()
        };
        injections.push(BugInjection {
            file: files[fi].clone(),
            line_number: li + 1,
            mutation: kind,
            original_line: line,
            mutated_line: mutated,
        });
    }

    let mut mutated_files = Vec::with_capacity(files.len());
    for (fi, path) in files.iter().enumerate() {
        let name = path
            .file_name()
            .ok_or_else(|| Error::Other(format!("bad file name: {}", path.display())))?;
        let out_path = out_dir.join(name);
        fs::write(&out_path, file_lines[fi].concat()).map_err(|e| Error::io(&out_path, e))?;
        mutated_files.push(out_path);
    }

    let mut labels: Vec<LabeledLine> = injections
        .iter()
        .enumerate()
        .map(|(k, inj)| {
            let (fi, li) = eligible[k];
            debug_assert_eq!(inj.line_number, li + 1);
            LabeledLine {
                file: mutated_files[fi].clone(),
                line_number: li + 1,
                label: LineLabel::Buggy,
            }
        })
        .collect();
    for &(fi, li) in &eligible[n_mut..2 * n_mut] {
        labels.push(LabeledLine {
            file: mutated_files[fi].clone(),
            line_number: li + 1,
            label: LineLabel::Clean,
        });
    }

    // Rewrite injection records to point at the mutated copies, which are
    // what the labels reference and what gets scored.
    for (k, inj) in injections.iter_mut().enumerate() {
        let (fi, _) = eligible[k];
        inj.file = mutated_files[fi].clone();
    }

    Ok(InjectionOutcome {
        mutated_files,
        injections,
        labels,
    })
}

/// Injection log as CSV.
pub fn mutations_csv(injections: &[BugInjection]) -> String {
    let mut out = String::from("file,line,mutation,original,mutated\n");
    for inj in injections {
        csvio::push_row(
            &mut out,
            &[
                &inj.file.to_string_lossy(),
                &inj.line_number.to_string(),
                inj.mutation.as_str(),
                &inj.original_line,
                &inj.mutated_line,
            ],
        );
    }
    out
}
