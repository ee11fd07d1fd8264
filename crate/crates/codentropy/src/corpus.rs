//! Corpus ingestion: byte-level vocabulary, token streams with line spans,
//! and the three-way dataset split (global-train / local-train / test lines).
//!
//! Everything operates on raw bytes. Source files in the wild mix encodings;
//! bytes are the deterministic realization of "character level" and cap the
//! vocabulary at 257 entries (256 byte values plus the unknown token).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lm::TokenId;

/// Bijection between observed byte values and dense token ids, plus a
/// reserved unknown id for bytes never seen at vocabulary-build time.
///
/// Ids are assigned in ascending byte order, so the mapping depends only on
/// the *set* of bytes present, never on file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    byte_to_id: [Option<TokenId>; 256],
    id_to_byte: Vec<u8>,
}

impl Vocabulary {
    /// Build from the distinct bytes across all files.
    pub fn build(files: &[PathBuf]) -> Result<Self> {
        let mut present = [false; 256];
        let mut any = false;
        for path in files {
            let data = fs::read(path).map_err(|e| Error::io(path, e))?;
            for &b in &data {
                present[b as usize] = true;
            }
            any = any || !data.is_empty();
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_present(&present))
    }

    /// Build directly from one byte slice (used by tests and examples).
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut present = [false; 256];
        for &b in data {
            present[b as usize] = true;
        }
        Ok(Self::from_present(&present))
    }

    fn from_present(present: &[bool; 256]) -> Self {
        let mut byte_to_id = [None; 256];
        let mut id_to_byte = Vec::new();
        for b in 0..256usize {
            if present[b] {
                byte_to_id[b] = Some(id_to_byte.len() as TokenId);
                id_to_byte.push(b as u8);
            }
        }
        Self {
            byte_to_id,
            id_to_byte,
        }
    }

    /// Reconstruct from the id-ordered byte list (checkpoint loading).
    pub fn from_id_list(id_to_byte: Vec<u8>) -> Result<Self> {
        let mut byte_to_id = [None; 256];
        let mut prev: Option<u8> = None;
        for (id, &b) in id_to_byte.iter().enumerate() {
            if byte_to_id[b as usize].is_some() {
                return Err(Error::Other(format!("duplicate byte {b} in vocabulary")));
            }
            if let Some(p) = prev {
                if b <= p {
                    return Err(Error::Other("vocabulary bytes not ascending".into()));
                }
            }
            prev = Some(b);
            byte_to_id[b as usize] = Some(id as TokenId);
        }
        Ok(Self {
            byte_to_id,
            id_to_byte,
        })
    }

    /// Total number of token ids, unknown included.
    pub fn size(&self) -> usize {
        self.id_to_byte.len() + 1
    }

    /// The unknown-token id (always the final id).
    pub fn unk_id(&self) -> TokenId {
        self.id_to_byte.len() as TokenId
    }

    pub fn id_for(&self, byte: u8) -> TokenId {
        self.byte_to_id[byte as usize].unwrap_or_else(|| self.unk_id())
    }

    /// The byte for an id; `None` for the unknown id.
    pub fn byte_for(&self, id: TokenId) -> Option<u8> {
        self.id_to_byte.get(id as usize).copied()
    }

    /// Id-ordered byte list (serialization order).
    pub fn id_list(&self) -> &[u8] {
        &self.id_to_byte
    }

    /// Encode raw bytes. Unseen bytes map to the unknown id; this never
    /// fails. Line spans split on the newline byte, each span including its
    /// terminating newline so that spans partition the stream.
    pub fn encode(&self, raw: &[u8]) -> TokenStream {
        let ids: Vec<TokenId> = raw.iter().map(|&b| self.id_for(b)).collect();
        let mut line_spans = Vec::new();
        let mut start = 0usize;
        let mut line_number = 1usize;
        for (i, &b) in raw.iter().enumerate() {
            if b == b'\n' {
                line_spans.push(LineSpan {
                    start,
                    end: i + 1,
                    line_number,
                });
                start = i + 1;
                line_number += 1;
            }
        }
        if start < raw.len() {
            line_spans.push(LineSpan {
                start,
                end: raw.len(),
                line_number,
            });
        }
        TokenStream { ids, line_spans }
    }

    /// Decode ids back to bytes; `None` if any id is the unknown token.
    pub fn decode(&self, ids: &[TokenId]) -> Option<Vec<u8>> {
        ids.iter().map(|&id| self.byte_for(id)).collect()
    }
}

/// Half-open token span `[start, end)` covering one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
    /// 1-based line number.
    pub line_number: usize,
}

/// An encoded file: token ids plus the contiguous, non-overlapping line
/// spans that cover them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub ids: Vec<TokenId>,
    pub line_spans: Vec<LineSpan>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids with the given (1-based) line numbers spliced out.
    pub fn masked_ids(&self, excluded_lines: &BTreeSet<usize>) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(self.ids.len());
        for span in &self.line_spans {
            if !excluded_lines.contains(&span.line_number) {
                out.extend_from_slice(&self.ids[span.start..span.end]);
            }
        }
        out
    }
}

/// Binary line label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineLabel {
    Buggy,
    Clean,
}

impl LineLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LineLabel::Buggy => "buggy",
            LineLabel::Clean => "clean",
        }
    }
}

/// One labeled test line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledLine {
    pub file: PathBuf,
    /// 1-based.
    pub line_number: usize,
    pub label: LineLabel,
}

/// Validated three-way split: global training files, local training files,
/// and the labeled test lines drawn from the local files.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub global_train: Vec<PathBuf>,
    pub local_train: Vec<PathBuf>,
    pub test_lines: Vec<LabeledLine>,
}

impl CorpusSplit {
    /// Labeled line numbers per file, for masking.
    pub fn labels_by_file(&self) -> BTreeMap<&Path, BTreeSet<usize>> {
        let mut map: BTreeMap<&Path, BTreeSet<usize>> = BTreeMap::new();
        for l in &self.test_lines {
            map.entry(l.file.as_path()).or_default().insert(l.line_number);
        }
        map
    }

    /// Label lookup keyed by (file, line).
    pub fn label_map(&self) -> BTreeMap<(&Path, usize), LineLabel> {
        self.test_lines
            .iter()
            .map(|l| ((l.file.as_path(), l.line_number), l.label))
            .collect()
    }
}

fn count_lines(data: &[u8]) -> usize {
    if data.is_empty() {
        return 0;
    }
    let newlines = data.iter().filter(|&&b| b == b'\n').count();
    if data[data.len() - 1] == b'\n' {
        newlines
    } else {
        newlines + 1
    }
}

/// Parse and validate a split manifest.
///
/// Plain text, one record per line, tab-separated:
///
/// ```text
/// global<TAB>relative/path
/// local<TAB>relative/path
/// buggy<TAB>relative/path<TAB>lineno
/// clean<TAB>relative/path<TAB>lineno
/// ```
///
/// Paths are resolved against the manifest's directory. Blank lines and
/// lines starting with `#` are ignored. Every referenced file must exist,
/// labeled files must be in the local set, labeled line numbers must be in
/// range, and no (file, line) pair may be labeled twice.
pub fn load_split(manifest: &Path) -> Result<CorpusSplit> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut split = CorpusSplit {
        global_train: Vec::new(),
        local_train: Vec::new(),
        test_lines: Vec::new(),
    };

    let malformed = |line: usize, message: &str| Error::Manifest {
        path: manifest.to_path_buf(),
        line,
        message: message.to_string(),
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "global" | "local" => {
                if fields.len() != 2 || fields[1].is_empty() {
                    return Err(malformed(lineno, "expected `role<TAB>path`"));
                }
                let path = base.join(fields[1]);
                if fields[0] == "global" {
                    split.global_train.push(path);
                } else {
                    split.local_train.push(path);
                }
            }
            "buggy" | "clean" => {
                if fields.len() != 3 || fields[1].is_empty() {
                    return Err(malformed(lineno, "expected `label<TAB>path<TAB>lineno`"));
                }
                let line_number: usize = fields[2].parse().map_err(|_| {
                    malformed(lineno, "line number must be a positive integer")
                })?;
                if line_number == 0 {
                    return Err(malformed(lineno, "line numbers are 1-based"));
                }
                let label = if fields[0] == "buggy" {
                    LineLabel::Buggy
                } else {
                    LineLabel::Clean
                };
                split.test_lines.push(LabeledLine {
                    file: base.join(fields[1]),
                    line_number,
                    label,
                });
            }
            other => {
                return Err(malformed(
                    lineno,
                    &format!("unknown record kind `{other}`"),
                ));
            }
        }
    }

    // Referenced files must exist.
    for path in split.global_train.iter().chain(&split.local_train) {
        if !path.is_file() {
            return Err(Error::DanglingFile(path.clone()));
        }
    }

    // Labels must point into the local set, at an existing line, once.
    let local_set: BTreeSet<&Path> = split.local_train.iter().map(|p| p.as_path()).collect();
    let mut line_counts: BTreeMap<&Path, usize> = BTreeMap::new();
    let mut seen: BTreeSet<(&Path, usize)> = BTreeSet::new();
    for l in &split.test_lines {
        if !local_set.contains(l.file.as_path()) {
            return Err(Error::LabelOutsideLocalSet {
                file: l.file.clone(),
                line_number: l.line_number,
            });
        }
        let count = match line_counts.get(l.file.as_path()) {
            Some(&c) => c,
            None => {
                let data = fs::read(&l.file).map_err(|e| Error::io(&l.file, e))?;
                let c = count_lines(&data);
                line_counts.insert(l.file.as_path(), c);
                c
            }
        };
        if l.line_number > count {
            return Err(Error::LabelOutOfRange {
                file: l.file.clone(),
                line_number: l.line_number,
                line_count: count,
            });
        }
        if !seen.insert((l.file.as_path(), l.line_number)) {
            return Err(Error::DuplicateLabel {
                file: l.file.clone(),
                line_number: l.line_number,
            });
        }
    }

    Ok(split)
}

/// Serialize a split back to the manifest format, paths relative to `base`.
pub fn manifest_text(split: &CorpusSplit, base: &Path) -> String {
    let rel = |p: &Path| -> String {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let mut out = String::new();
    for p in &split.global_train {
        out.push_str(&format!("global\t{}\n", rel(p)));
    }
    for p in &split.local_train {
        out.push_str(&format!("local\t{}\n", rel(p)));
    }
    for l in &split.test_lines {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            l.label.as_str(),
            rel(&l.file),
            l.line_number
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn vocab_of(data: &[u8]) -> Vocabulary {
        Vocabulary::from_bytes(data).unwrap()
    }

    #[test]
    fn vocabulary_from_two_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        fs::write(&a, "ab\n").unwrap();
        fs::write(&b, "ba\n").unwrap();
        let v = Vocabulary::build(&[a, b]).unwrap();
        assert_eq!(v.size(), 4);
        assert_eq!(v.id_for(b'\n'), 0);
        assert_eq!(v.id_for(b'a'), 1);
        assert_eq!(v.id_for(b'b'), 2);
        assert_eq!(v.unk_id(), 3);
    }

    #[test]
    fn vocabulary_single_byte() {
        let v = vocab_of(b"aaa");
        assert_eq!(v.size(), 2);
    }

    #[test]
    fn vocabulary_all_bytes() {
        let all: Vec<u8> = (0..=255u8).collect();
        let v = vocab_of(&all);
        assert_eq!(v.size(), 257);
        for b in 0..=255u8 {
            assert_eq!(v.byte_for(v.id_for(b)), Some(b));
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("empty.txt");
        fs::File::create(&a).unwrap().flush().unwrap();
        match Vocabulary::build(&[a]) {
            Err(Error::EmptyCorpus) => {}
            other => panic!("expected EmptyCorpus, got {other:?}"),
        }
    }

    #[test]
    fn unreadable_file_names_the_path() {
        let err = Vocabulary::build(&[PathBuf::from("/nonexistent/xyz.txt")]).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.to_string_lossy().contains("xyz.txt")),
            other => panic!("expected Io, got {other:?}"),
        }
    }

    #[test]
    fn encode_maps_unseen_to_unk_with_line_spans() {
        let v = vocab_of(b"ab\nba\n");
        let stream = v.encode(b"ab\ncd");
        assert_eq!(
            stream.ids,
            vec![v.id_for(b'a'), v.id_for(b'b'), v.id_for(b'\n'), 3, 3]
        );
        assert_eq!(
            stream.line_spans,
            vec![
                LineSpan { start: 0, end: 3, line_number: 1 },
                LineSpan { start: 3, end: 5, line_number: 2 },
            ]
        );
    }

    #[test]
    fn encode_empty_input() {
        let v = vocab_of(b"x");
        let stream = v.encode(b"");
        assert!(stream.ids.is_empty());
        assert!(stream.line_spans.is_empty());
    }

    #[test]
    fn encode_single_unseen_byte() {
        let v = vocab_of(b"a");
        let stream = v.encode(b"x");
        assert_eq!(stream.ids, vec![v.unk_id()]);
        assert_eq!(stream.line_spans.len(), 1);
        assert_eq!(stream.line_spans[0], LineSpan { start: 0, end: 1, line_number: 1 });
    }

    #[test]
    fn spans_partition_the_stream() {
        let v = vocab_of(b"ab\ncd\n\nxy");
        let stream = v.encode(b"ab\ncd\n\nxy");
        let mut covered = Vec::new();
        for s in &stream.line_spans {
            assert_eq!(s.start, covered.len());
            covered.extend_from_slice(&stream.ids[s.start..s.end]);
        }
        assert_eq!(covered, stream.ids);
    }

    #[test]
    fn masked_ids_splices_out_lines() {
        let v = vocab_of(b"aa\nbb\ncc\n");
        let stream = v.encode(b"aa\nbb\ncc\n");
        let excluded: BTreeSet<usize> = [2].into_iter().collect();
        let masked = stream.masked_ids(&excluded);
        let expect = v.encode(b"aa\ncc\n").ids;
        assert_eq!(masked, expect);
    }

    proptest! {
        #[test]
        fn round_trip_on_vocabulary_bytes(data in proptest::collection::vec(any::<u8>(), 1..200)) {
            let v = vocab_of(&data);
            let stream = v.encode(&data);
            prop_assert_eq!(v.decode(&stream.ids).unwrap(), data);
        }

        #[test]
        fn vocabulary_is_order_independent(
            a in proptest::collection::vec(any::<u8>(), 1..100),
            b in proptest::collection::vec(any::<u8>(), 1..100),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let pa = dir.path().join("a");
            let pb = dir.path().join("b");
            fs::write(&pa, &a).unwrap();
            fs::write(&pb, &b).unwrap();
            let v1 = Vocabulary::build(&[pa.clone(), pb.clone()]).unwrap();
            let v2 = Vocabulary::build(&[pb, pa]).unwrap();
            prop_assert_eq!(v1, v2);
        }

        #[test]
        fn spans_are_contiguous_and_cover(data in proptest::collection::vec(any::<u8>(), 0..300)) {
            let v = vocab_of(b"seed");
            let stream = v.encode(&data);
            let mut pos = 0usize;
            for (i, s) in stream.line_spans.iter().enumerate() {
                prop_assert_eq!(s.start, pos);
                prop_assert!(s.end > s.start);
                prop_assert_eq!(s.line_number, i + 1);
                pos = s.end;
            }
            prop_assert_eq!(pos, data.len());
        }
    }

    fn write_manifest_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
        let g1 = dir.join("g1.java");
        let g2 = dir.join("g2.java");
        let l1 = dir.join("l1.java");
        fs::write(&g1, "int a;\nint b;\n").unwrap();
        fs::write(&g2, "class A {}\n").unwrap();
        fs::write(&l1, "line1\nline2\nline3\nline4\nline5\nline6\nline7\nline8\nline9\nline10\n").unwrap();
        let manifest = dir.join("manifest.txt");
        (manifest, g1, g2, l1)
    }

    #[test]
    fn load_split_counts_records() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ..) = write_manifest_files(dir.path());
        fs::write(
            &manifest,
            "global\tg1.java\nglobal\tg2.java\nlocal\tl1.java\nbuggy\tl1.java\t2\nclean\tl1.java\t3\nbuggy\tl1.java\t5\n",
        )
        .unwrap();
        let split = load_split(&manifest).unwrap();
        assert_eq!(split.global_train.len(), 2);
        assert_eq!(split.local_train.len(), 1);
        assert_eq!(split.test_lines.len(), 3);
    }

    #[test]
    fn load_split_rejects_out_of_range_line() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ..) = write_manifest_files(dir.path());
        fs::write(&manifest, "local\tl1.java\nbuggy\tl1.java\t99\n").unwrap();
        match load_split(&manifest) {
            Err(Error::LabelOutOfRange { line_number: 99, line_count: 10, .. }) => {}
            other => panic!("expected LabelOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn load_split_rejects_duplicate_labels() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ..) = write_manifest_files(dir.path());
        fs::write(
            &manifest,
            "local\tl1.java\nbuggy\tl1.java\t2\nclean\tl1.java\t2\n",
        )
        .unwrap();
        match load_split(&manifest) {
            Err(Error::DuplicateLabel { line_number: 2, .. }) => {}
            other => panic!("expected DuplicateLabel, got {other:?}"),
        }
    }

    #[test]
    fn load_split_rejects_dangling_reference() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.txt");
        fs::write(&manifest, "global\tmissing.java\n").unwrap();
        match load_split(&manifest) {
            Err(Error::DanglingFile(p)) => assert!(p.ends_with("missing.java")),
            other => panic!("expected DanglingFile, got {other:?}"),
        }
    }

    #[test]
    fn load_split_rejects_label_outside_local_set() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ..) = write_manifest_files(dir.path());
        fs::write(&manifest, "global\tg1.java\nbuggy\tg1.java\t1\n").unwrap();
        match load_split(&manifest) {
            Err(Error::LabelOutsideLocalSet { .. }) => {}
            other => panic!("expected LabelOutsideLocalSet, got {other:?}"),
        }
    }

    #[test]
    fn load_split_rejects_malformed_records() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.txt");
        fs::write(&manifest, "frobnicate\tx\n").unwrap();
        match load_split(&manifest) {
            Err(Error::Manifest { line: 1, .. }) => {}
            other => panic!("expected Manifest error, got {other:?}"),
        }
        fs::write(&manifest, "buggy\tx\tnot_a_number\n").unwrap();
        assert!(matches!(load_split(&manifest), Err(Error::Manifest { .. })));
    }

    #[test]
    fn manifest_round_trips_through_text() {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, ..) = write_manifest_files(dir.path());
        let text = "global\tg1.java\nlocal\tl1.java\nbuggy\tl1.java\t4\nclean\tl1.java\t6\n";
        fs::write(&manifest, text).unwrap();
        let split = load_split(&manifest).unwrap();
        assert_eq!(manifest_text(&split, dir.path()), text);
    }
}
