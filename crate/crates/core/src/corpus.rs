//! Vocabularies, token-id encoding and corpus loading.
//!
//! Input text is pre-tokenized: tokens are separated by whitespace and each
//! line is a sequence boundary. A corpus is consumed either as one continuous
//! stream (language-model mode) or line by line.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const UNK_SURFACE: &str = "<unk>";
pub const BLANK_SURFACE: &str = "<blank>";
pub const BOUNDARY_SURFACE: &str = "<s>";

const RESERVED: [&str; 3] = [UNK_SURFACE, BLANK_SURFACE, BOUNDARY_SURFACE];

/// How a corpus is split into sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusMode {
    /// All lines concatenated into a single stream.
    Continuous,
    /// Every line is an independent sequence.
    PerLine,
}

impl CorpusMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusMode::Continuous => "continuous",
            CorpusMode::PerLine => "per-line",
        }
    }
}

impl fmt::Display for CorpusMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorpusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(CorpusMode::Continuous),
            "per-line" => Ok(CorpusMode::PerLine),
            other => Err(Error::InvalidParameter(format!("unknown corpus mode {other:?}"))),
        }
    }
}

/// A sequence of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<TokenId>);

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSequence(ids)
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }

    /// Concatenate several sequences into one stream.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a TokenSequence>) -> TokenSequence {
        TokenSequence(parts.into_iter().flat_map(|s| s.0.iter().copied()).collect())
    }
}

impl Deref for TokenSequence {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSequence(ids)
    }
}

/// Token frequencies with first-occurrence positions.
///
/// Forms a commutative monoid under [`FrequencyTable::merge`] as long as the
/// shards were built with their global stream offsets.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    entries: HashMap<String, (u64, u64)>,
    tokens: u64,
}

impl FrequencyTable {
    /// Count `tokens`, whose first element sits at global position `offset`.
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>, offset: u64) -> Self {
        let mut table = FrequencyTable::default();
        for (i, tok) in tokens.into_iter().enumerate() {
            let pos = offset + i as u64;
            let entry = table.entries.entry(tok.as_ref().to_owned()).or_insert((0, pos));
            entry.0 += 1;
            table.tokens += 1;
        }
        table
    }

    pub fn merge(mut self, other: FrequencyTable) -> FrequencyTable {
        for (tok, (count, first)) in other.entries {
            let entry = self.entries.entry(tok).or_insert((0, first));
            entry.0 += count;
            entry.1 = entry.1.min(first);
        }
        self.tokens += other.tokens;
        self
    }

    pub fn total(&self) -> u64 {
        self.tokens
    }

    pub fn count(&self, token: &str) -> u64 {
        self.entries.get(token).map_or(0, |e| e.0)
    }
}

/// Bidirectional token/id map.
///
/// Ids 0, 1 and 2 are reserved for `<unk>`, `<blank>` and `<s>`. The
/// remaining ids are dense and ordered by descending frequency, ties broken
/// by first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const UNK: TokenId = 0;
    pub const BLANK: TokenId = 1;
    pub const BOUNDARY: TokenId = 2;
    pub const RESERVED: usize = 3;

    /// Build from a token stream, keeping tokens seen more than `min_count` times.
    pub fn build<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>, min_count: u64) -> Result<Self> {
        Self::from_frequencies(&FrequencyTable::from_tokens(tokens, 0), min_count)
    }

    /// Build by counting `shards` in parallel. Shards must be given in stream order.
    pub fn build_sharded<S: AsRef<str> + Sync>(shards: &[&[S]], min_count: u64) -> Result<Self> {
        let mut offsets = Vec::with_capacity(shards.len());
        let mut acc = 0u64;
        for shard in shards {
            offsets.push(acc);
            acc += shard.len() as u64;
        }
        let freq = shards
            .par_iter()
            .zip(offsets.par_iter())
            .map(|(shard, &off)| FrequencyTable::from_tokens(shard.iter(), off))
            .reduce(FrequencyTable::default, FrequencyTable::merge);
        Self::from_frequencies(&freq, min_count)
    }

    pub fn from_frequencies(freq: &FrequencyTable, min_count: u64) -> Result<Self> {
        if freq.total() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut kept: Vec<(&str, u64, u64)> = freq
            .entries
            .iter()
            .filter(|(tok, (count, _))| *count > min_count && !RESERVED.contains(&tok.as_str()))
            .map(|(tok, &(count, first))| (tok.as_str(), count, first))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(kept.into_iter().map(|(tok, _, _)| tok.to_owned()));
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if ids.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::Parse { line: i + 1, message: format!("duplicate token {tok:?}") });
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Never true: the reserved tokens are always present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> TokenId {
        Self::UNK
    }

    pub fn blank_id(&self) -> TokenId {
        Self::BLANK
    }

    pub fn boundary_id(&self) -> TokenId {
        Self::BOUNDARY
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < Self::RESERVED
    }

    /// Id for a surface token. Reserved surfaces found in text map to `<unk>`
    /// so that corpus text can never produce the blank or boundary ids.
    pub fn id(&self, token: &str) -> TokenId {
        match self.ids.get(token) {
            Some(&id) if !Self::is_reserved(id) => id,
            _ => Self::UNK,
        }
    }

    pub fn surface(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: impl IntoIterator<Item = S>) -> TokenSequence {
        TokenSequence(tokens.into_iter().map(|t| self.id(t.as_ref())).collect())
    }

    pub fn decode<'a>(&'a self, seq: &TokenSequence) -> Vec<&'a str> {
        seq.iter().map(|&id| self.surface(id)).collect()
    }

    /// One token per line; the line index is the id.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for tok in &self.tokens {
            writeln!(out, "{tok}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in input.lines() {
            tokens.push(line?);
        }
        for (i, reserved) in RESERVED.iter().enumerate() {
            match tokens.get(i) {
                Some(tok) if tok == reserved => {}
                other => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected reserved token {reserved:?}, found {other:?}"),
                    })
                }
            }
        }
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Parse { line: i + 1, message: format!("invalid vocabulary entry {tok:?}") });
            }
        }
        Self::from_tokens(tokens)
    }

    /// Content hash of the serialized vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        crate::hash::content_hash(&buf)
    }
}

/// Whitespace-tokenized lines of a text corpus.
pub fn read_lines<R: BufRead>(input: R) -> Result<Vec<Vec<String>>> {
    input.lines().map(|line| Ok(line?.split_whitespace().map(str::to_owned).collect())).collect()
}

/// Encode tokenized lines as sequences according to `mode`.
///
/// Continuous mode yields a single sequence; per-line mode yields one per line,
/// including empty ones so that line layout is preserved.
pub fn encode_lines(vocab: &Vocabulary, lines: &[Vec<String>], mode: CorpusMode) -> Vec<TokenSequence> {
    match mode {
        CorpusMode::Continuous => vec![vocab.encode(lines.iter().flatten())],
        CorpusMode::PerLine => lines.iter().map(|l| vocab.encode(l)).collect(),
    }
}
