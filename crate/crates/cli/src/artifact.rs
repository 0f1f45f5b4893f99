//! Input loading, run metadata and output writing.
//!
//! Every artifact records the tool version, the subcommand, the resolved
//! configuration and the SHA-256 of each input, keyed by the input's file
//! name only so that reruns from different directories stay byte-identical.

use std::fmt;
use std::fs;
use std::io::{BufReader, Cursor, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ngnoise_core::corpus::{encode_lines, read_lines};
use ngnoise_core::hash::content_hash;
use ngnoise_core::{CorpusMode, CountTable, TokenSequence, Vocabulary};
use serde::Serialize;
use serde_json::Value;

/// Bad invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub role: &'static str,
    pub name: String,
    pub sha256: String,
}

/// A file read fully into memory and hashed.
pub struct Input {
    pub record: InputRecord,
    bytes: Vec<u8>,
}

impl Input {
    pub fn load(role: &'static str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {role} {}", path.display()))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let sha256 = content_hash(&bytes);
        Ok(Input { record: InputRecord { role, name, sha256 }, bytes })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn reader(&self) -> BufReader<Cursor<&[u8]>> {
        BufReader::new(Cursor::new(&self.bytes))
    }

    fn what(&self) -> String {
        format!("{} {}", self.record.role, self.record.name)
    }

    pub fn lines(&self) -> Result<Vec<Vec<String>>> {
        read_lines(self.reader()).with_context(|| format!("parsing {}", self.what()))
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::read_from(self.reader()).with_context(|| format!("parsing {}", self.what()))
    }

    pub fn counts(&self) -> Result<CountTable> {
        CountTable::read_tsv(self.reader()).with_context(|| format!("parsing {}", self.what()))
    }
}

/// A text corpus with its tokenized lines and encoding under some vocabulary.
pub struct Corpus {
    pub lines: Vec<Vec<String>>,
    pub seqs: Vec<TokenSequence>,
}

impl Corpus {
    pub fn encode(input: &Input, vocab: &Vocabulary, mode: CorpusMode) -> Result<Self> {
        let lines = input.lines()?;
        let seqs = encode_lines(vocab, &lines, mode);
        Ok(Corpus { lines, seqs })
    }

    pub fn stream(&self) -> TokenSequence {
        TokenSequence::concat(&self.seqs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub inputs: Vec<InputRecord>,
}

impl RunMeta {
    pub fn new(command: &'static str, config: Value, inputs: &[&Input]) -> Self {
        RunMeta {
            tool: "ngnoise",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: inputs.iter().map(|i| i.record.clone()).collect(),
        }
    }

    pub fn to_compact(&self) -> String {
        serde_json::to_string(self).expect("metadata serializes")
    }
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    meta: &'a RunMeta,
    report: &'a R,
}

pub fn json_document<R: Serialize>(meta: &RunMeta, report: &R) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&Envelope { meta, report }).expect("report serializes");
    out.push(b'\n');
    out
}

/// Where a single-document command writes: a file, or stdout when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `<path>.meta.json`, for artifacts whose own format has no room for metadata.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}
