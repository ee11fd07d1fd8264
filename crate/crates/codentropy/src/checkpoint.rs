//! Versioned binary files: LSTM checkpoints, vocabulary files and n-gram
//! tables. Each starts with a four-byte magic and a format version; numbers
//! are little-endian, parameters are 64-bit floats in declared layout order.
//! Loading validates shape totals and rejects mismatches.

use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::lm::TokenId;
use crate::ngram::NgramModel;
use crate::nn::{LstmParams, ModelConfig};

pub const LSTM_MAGIC: &[u8; 4] = b"CELM";
pub const VOCAB_MAGIC: &[u8; 4] = b"CVOC";
pub const NGRAM_MAGIC: &[u8; 4] = b"CNGM";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], path: &'a Path) -> Self {
        Self { data, pos: 0, path }
    }

    fn fail(&self, message: &str) -> Error {
        Error::BadFormat {
            path: self.path.to_path_buf(),
            message: message.to_string(),
        }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(self.fail("unexpected end of file"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn expect_magic(&mut self, magic: &[u8; 4], what: &str) -> Result<()> {
        if self.bytes(4)? != magic {
            return Err(self.fail(&format!("not a {what} file (bad magic)")));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(self.fail(&format!("unsupported {what} format version {version}")));
        }
        Ok(())
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.fail("trailing bytes after payload"));
        }
        Ok(())
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_vocab(out: &mut Vec<u8>, vocab: &Vocabulary) {
    push_u16(out, vocab.id_list().len() as u16);
    out.extend_from_slice(vocab.id_list());
}

fn read_vocab(r: &mut Reader) -> Result<Vocabulary> {
    let n = r.u16()? as usize;
    if n > 256 {
        return Err(r.fail("vocabulary longer than 256 bytes"));
    }
    let bytes = r.bytes(n)?.to_vec();
    Vocabulary::from_id_list(bytes)
        .map_err(|e| r.fail(&format!("invalid vocabulary: {e}")))
}

fn push_config(out: &mut Vec<u8>, cfg: &ModelConfig) {
    push_u32(out, cfg.vocab_size as u32);
    push_u32(out, cfg.embed_dim as u32);
    push_u32(out, cfg.hidden_dim as u32);
    push_u32(out, cfg.num_layers as u32);
    push_u32(out, cfg.bptt_len as u32);
    push_u64(out, cfg.rng_seed);
}

fn read_config(r: &mut Reader) -> Result<ModelConfig> {
    Ok(ModelConfig {
        vocab_size: r.u32()? as usize,
        embed_dim: r.u32()? as usize,
        hidden_dim: r.u32()? as usize,
        num_layers: r.u32()? as usize,
        bptt_len: r.u32()? as usize,
        rng_seed: r.u64()?,
    })
}

/// Serialize an LSTM checkpoint: header, config, vocabulary, then every
/// parameter array in declared order.
pub fn lstm_bytes(params: &LstmParams, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + params.data().len() * 8);
    out.extend_from_slice(LSTM_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_config(&mut out, params.config());
    push_vocab(&mut out, vocab);
    push_u64(&mut out, params.data().len() as u64);
    for &x in params.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn save_lstm(path: &Path, params: &LstmParams, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, lstm_bytes(params, vocab)).map_err(|e| Error::io(path, e))
}

pub fn load_lstm(path: &Path) -> Result<(LstmParams, Vocabulary)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&data, path);
    r.expect_magic(LSTM_MAGIC, "checkpoint")?;
    let config = read_config(&mut r)?;
    let vocab = read_vocab(&mut r)?;
    if vocab.size() != config.vocab_size {
        return Err(r.fail(&format!(
            "vocabulary size {} does not match config vocab_size {}",
            vocab.size(),
            config.vocab_size
        )));
    }
    let n = r.u64()? as usize;
    let mut buf = Vec::with_capacity(n);
    for _ in 0..n {
        buf.push(r.f64()?);
    }
    r.done()?;
    let params = LstmParams::from_flat(config, buf)
        .map_err(|e| r.fail(&format!("parameter shape mismatch: {e}")))?;
    Ok((params, vocab))
}

pub fn vocab_bytes(vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(VOCAB_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_vocab(&mut out, vocab);
    out
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, vocab_bytes(vocab)).map_err(|e| Error::io(path, e))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&data, path);
    r.expect_magic(VOCAB_MAGIC, "vocabulary")?;
    let vocab = read_vocab(&mut r)?;
    r.done()?;
    Ok(vocab)
}

/// Serialize an n-gram table: header, order, vocabulary, then context
/// records sorted by (length, lexicographic) with followers sorted by token.
pub fn ngram_bytes(model: &NgramModel, vocab: &Vocabulary) -> Vec<u8> {
    let records = model.sorted_records();
    let mut out = Vec::new();
    out.extend_from_slice(NGRAM_MAGIC);
    push_u32(&mut out, FORMAT_VERSION);
    push_u32(&mut out, model.order() as u32);
    push_vocab(&mut out, vocab);
    push_u64(&mut out, records.len() as u64);
    for (ctx, followers) in records {
        push_u16(&mut out, ctx.len() as u16);
        for &t in ctx {
            push_u16(&mut out, t);
        }
        push_u32(&mut out, followers.len() as u32);
        for (tok, count) in followers {
            push_u16(&mut out, tok);
            push_u64(&mut out, count);
        }
    }
    out
}

pub fn save_ngram(path: &Path, model: &NgramModel, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, ngram_bytes(model, vocab)).map_err(|e| Error::io(path, e))
}

pub fn load_ngram(path: &Path) -> Result<(NgramModel, Vocabulary)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&data, path);
    r.expect_magic(NGRAM_MAGIC, "n-gram table")?;
    let order = r.u32()? as usize;
    let vocab = read_vocab(&mut r)?;
    let n_records = r.u64()? as usize;
    let mut records = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        let ctx_len = r.u16()? as usize;
        let mut ctx = Vec::with_capacity(ctx_len);
        for _ in 0..ctx_len {
            ctx.push(r.u16()? as TokenId);
        }
        let n_followers = r.u32()? as usize;
        let mut followers = Vec::with_capacity(n_followers);
        for _ in 0..n_followers {
            let tok = r.u16()? as TokenId;
            let count = r.u64()?;
            followers.push((tok, count));
        }
        records.push((ctx, followers));
    }
    r.done()?;
    let model = NgramModel::from_records(order, vocab.size(), records)
        .map_err(|e| r.fail(&format!("invalid n-gram records: {e}")))?;
    Ok((model, vocab))
}

/// Model file kind, sniffed from the magic bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Lstm,
    Ngram,
    Vocab,
}

pub fn sniff_kind(path: &Path) -> Result<FileKind> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    if data.len() < 4 {
        return Err(Error::BadFormat {
            path: path.to_path_buf(),
            message: "file too short for a magic header".into(),
        });
    }
    match &data[..4] {
        m if m == LSTM_MAGIC => Ok(FileKind::Lstm),
        m if m == NGRAM_MAGIC => Ok(FileKind::Ngram),
        m if m == VOCAB_MAGIC => Ok(FileKind::Vocab),
        _ => Err(Error::BadFormat {
            path: path.to_path_buf(),
            message: "unrecognized magic bytes".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenStream;
    use crate::nn::init_params;

    fn sample_vocab() -> Vocabulary {
        Vocabulary::from_bytes(b"abc\nxyz 123").unwrap()
    }

    fn sample_params(vocab: &Vocabulary) -> LstmParams {
        let cfg = ModelConfig {
            vocab_size: vocab.size(),
            embed_dim: 5,
            hidden_dim: 7,
            num_layers: 2,
            bptt_len: 20,
            rng_seed: 99,
        };
        init_params(&cfg).unwrap()
    }

    #[test]
    fn lstm_checkpoint_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let vocab = sample_vocab();
        let params = sample_params(&vocab);
        save_lstm(&path, &params, &vocab).unwrap();
        let (loaded, loaded_vocab) = load_lstm(&path).unwrap();
        assert_eq!(loaded.data(), params.data());
        assert_eq!(loaded.config(), params.config());
        assert_eq!(loaded_vocab, vocab);
        assert_eq!(sniff_kind(&path).unwrap(), FileKind::Lstm);
    }

    #[test]
    fn vocab_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.bin");
        let vocab = sample_vocab();
        save_vocab(&path, &vocab).unwrap();
        assert_eq!(load_vocab(&path).unwrap(), vocab);
        assert_eq!(sniff_kind(&path).unwrap(), FileKind::Vocab);
    }

    #[test]
    fn ngram_table_round_trips_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = sample_vocab();
        let stream = TokenStream {
            ids: vec![0, 1, 2, 0, 1, 0, 3, 2, 1, 0],
            line_spans: Vec::new(),
        };
        let model = NgramModel::fit(&[&stream], 3, vocab.size()).unwrap();
        let path = dir.path().join("table.ngram");
        save_ngram(&path, &model, &vocab).unwrap();
        let (loaded, loaded_vocab) = load_ngram(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_vocab, vocab);
        assert_eq!(ngram_bytes(&model, &vocab), ngram_bytes(&loaded, &vocab));
        assert_eq!(sniff_kind(&path).unwrap(), FileKind::Ngram);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        fs::write(&path, b"JUNKJUNKJUNK").unwrap();
        assert!(matches!(load_lstm(&path), Err(Error::BadFormat { .. })));
        assert!(matches!(sniff_kind(&path), Err(Error::BadFormat { .. })));
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let vocab = sample_vocab();
        let params = sample_params(&vocab);
        let bytes = lstm_bytes(&params, &vocab);
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_lstm(&path), Err(Error::BadFormat { .. })));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let vocab = sample_vocab();
        let params = sample_params(&vocab);
        let mut bytes = lstm_bytes(&params, &vocab);
        // Append one extra parameter and fix up the count field by rebuilding.
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_lstm(&path), Err(Error::BadFormat { .. })));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.bin");
        let vocab = sample_vocab();
        let mut bytes = vocab_bytes(&vocab);
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_vocab(&path), Err(Error::BadFormat { .. })));
    }
}
