//! Count statistics over encoded corpora.
//!
//! A [`CountTable`] holds raw unigram, bigram and (optionally) trigram counts
//! together with the quantities derived from them: left and right
//! continuation counts, per-context bigram totals and the number of distinct
//! bigram types. Derived fields are always recomputed from the raw maps, never
//! accumulated, since set cardinalities do not add across shards.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::ops::Range;

use rayon::prelude::*;

use crate::corpus::{CorpusMode, TokenId, TokenSequence, Vocabulary};
use crate::error::{Error, Result};

const FORMAT_TAG: &str = "ngnoise-counts\tv1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct RawCounts {
    unigrams: HashMap<TokenId, u64>,
    bigrams: HashMap<(TokenId, TokenId), u64>,
    trigrams: HashMap<(TokenId, TokenId, TokenId), u64>,
}

impl RawCounts {
    /// Count unigrams at positions in `range` and every n-gram starting there.
    /// N-grams may extend past the end of the range, so adjacent ranges of one
    /// stream merge into exactly the unsharded counts.
    fn count_range(&mut self, stream: &[TokenId], range: Range<usize>, max_order: usize) {
        for i in range {
            *self.unigrams.entry(stream[i]).or_default() += 1;
            if i + 1 < stream.len() {
                *self.bigrams.entry((stream[i], stream[i + 1])).or_default() += 1;
            }
            if max_order >= 3 && i + 2 < stream.len() {
                *self.trigrams.entry((stream[i], stream[i + 1], stream[i + 2])).or_default() += 1;
            }
        }
    }

    fn count_line(&mut self, line: &[TokenId], max_order: usize) {
        if line.is_empty() {
            return;
        }
        let mut stream = Vec::with_capacity(line.len() + 1);
        stream.push(Vocabulary::BOUNDARY);
        stream.extend_from_slice(line);
        self.count_range(&stream, 0..stream.len(), max_order);
    }

    fn merge(mut self, other: RawCounts) -> RawCounts {
        for (k, v) in other.unigrams {
            *self.unigrams.entry(k).or_default() += v;
        }
        for (k, v) in other.bigrams {
            *self.bigrams.entry(k).or_default() += v;
        }
        for (k, v) in other.trigrams {
            *self.trigrams.entry(k).or_default() += v;
        }
        self
    }
}

/// Unigram, bigram and trigram counts plus continuation statistics.
///
/// Immutable once built. Map iteration is in ascending id order, so the
/// serialized form is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    mode: CorpusMode,
    max_order: usize,
    vocab_size: usize,
    vocab_hash: String,
    unigrams: Vec<u64>,
    bigrams: BTreeMap<(TokenId, TokenId), u64>,
    trigrams: Option<BTreeMap<(TokenId, TokenId, TokenId), u64>>,
    right_cont: Vec<u64>,
    left_cont: Vec<u64>,
    context_totals: Vec<u64>,
    bigram_types: u64,
    total_tokens: u64,
    warnings: Vec<String>,
}

fn check_order(max_order: usize) -> Result<()> {
    if !(2..=3).contains(&max_order) {
        return Err(Error::InvalidParameter(format!("max_order must be 2 or 3, got {max_order}")));
    }
    Ok(())
}

impl CountTable {
    /// Count n-grams over `seqs`.
    ///
    /// In continuous mode the sequences are treated as one stream with no
    /// boundary tokens. In per-line mode each non-empty sequence is prefixed
    /// with the boundary token and n-grams never cross sequences.
    pub fn build(vocab: &Vocabulary, seqs: &[TokenSequence], max_order: usize, mode: CorpusMode) -> Result<Self> {
        check_order(max_order)?;
        if seqs.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut raw = RawCounts::default();
        match mode {
            CorpusMode::Continuous => {
                let stream = TokenSequence::concat(seqs);
                raw.count_range(&stream, 0..stream.len(), max_order);
            }
            CorpusMode::PerLine => {
                for seq in seqs {
                    raw.count_line(seq, max_order);
                }
            }
        }
        Ok(Self::finalize(vocab.len(), vocab.fingerprint(), raw, max_order, mode))
    }

    /// Same as [`CountTable::build`], counting `n_shards` pieces in parallel and merging.
    pub fn build_sharded(
        vocab: &Vocabulary,
        seqs: &[TokenSequence],
        max_order: usize,
        mode: CorpusMode,
        n_shards: usize,
    ) -> Result<Self> {
        check_order(max_order)?;
        if seqs.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let n_shards = n_shards.max(1);
        let raw = match mode {
            CorpusMode::Continuous => {
                let stream = TokenSequence::concat(seqs);
                let chunk = stream.len().div_ceil(n_shards).max(1);
                let ranges: Vec<Range<usize>> =
                    (0..stream.len()).step_by(chunk).map(|start| start..(start + chunk).min(stream.len())).collect();
                ranges
                    .into_par_iter()
                    .map(|r| {
                        let mut raw = RawCounts::default();
                        raw.count_range(&stream, r, max_order);
                        raw
                    })
                    .reduce(RawCounts::default, RawCounts::merge)
            }
            CorpusMode::PerLine => {
                let chunk = seqs.len().div_ceil(n_shards).max(1);
                seqs.par_chunks(chunk)
                    .map(|lines| {
                        let mut raw = RawCounts::default();
                        for line in lines {
                            raw.count_line(line, max_order);
                        }
                        raw
                    })
                    .reduce(RawCounts::default, RawCounts::merge)
            }
        };
        Ok(Self::finalize(vocab.len(), vocab.fingerprint(), raw, max_order, mode))
    }

    /// A table with no counts, the identity for [`CountTable::merge`].
    pub fn empty(vocab: &Vocabulary, max_order: usize, mode: CorpusMode) -> Result<Self> {
        check_order(max_order)?;
        Ok(Self::finalize(vocab.len(), vocab.fingerprint(), RawCounts::default(), max_order, mode))
    }

    fn finalize(vocab_size: usize, vocab_hash: String, raw: RawCounts, max_order: usize, mode: CorpusMode) -> Self {
        let mut unigrams = vec![0u64; vocab_size];
        for (id, c) in raw.unigrams {
            unigrams[id as usize] += c;
        }
        let bigrams: BTreeMap<_, _> = raw.bigrams.into_iter().filter(|&(_, c)| c > 0).collect();
        let trigrams = (max_order >= 3).then(|| raw.trigrams.into_iter().filter(|&(_, c)| c > 0).collect());
        Self::from_parts(vocab_size, vocab_hash, unigrams, bigrams, trigrams, max_order, mode)
    }

    fn from_parts(
        vocab_size: usize,
        vocab_hash: String,
        unigrams: Vec<u64>,
        bigrams: BTreeMap<(TokenId, TokenId), u64>,
        trigrams: Option<BTreeMap<(TokenId, TokenId, TokenId), u64>>,
        max_order: usize,
        mode: CorpusMode,
    ) -> Self {
        let mut right_cont = vec![0u64; vocab_size];
        let mut left_cont = vec![0u64; vocab_size];
        let mut context_totals = vec![0u64; vocab_size];
        for (&(a, b), &c) in &bigrams {
            right_cont[a as usize] += 1;
            left_cont[b as usize] += 1;
            context_totals[a as usize] += c;
        }
        let total_tokens = unigrams.iter().sum();
        let mut warnings = Vec::new();
        if total_tokens > 0 && bigrams.is_empty() {
            warnings.push("no bigrams: every sequence is shorter than 2 tokens".to_string());
        }
        if let Some(tri) = &trigrams {
            if total_tokens > 0 && tri.is_empty() {
                warnings.push("no trigrams: every sequence is shorter than 3 tokens".to_string());
            }
        }
        CountTable {
            mode,
            max_order,
            vocab_size,
            vocab_hash,
            unigrams,
            bigram_types: bigrams.len() as u64,
            bigrams,
            trigrams,
            right_cont,
            left_cont,
            context_totals,
            total_tokens,
            warnings,
        }
    }

    /// Add raw counts of two tables built over the same vocabulary, then
    /// recompute all derived statistics from the merged maps.
    pub fn merge(&self, other: &CountTable) -> Result<CountTable> {
        if self.vocab_size != other.vocab_size || self.vocab_hash != other.vocab_hash {
            return Err(Error::VocabularyMismatch(format!(
                "tables built over vocabularies {} ({} ids) and {} ({} ids)",
                short(&self.vocab_hash),
                self.vocab_size,
                short(&other.vocab_hash),
                other.vocab_size
            )));
        }
        if self.mode != other.mode || self.max_order != other.max_order {
            return Err(Error::InvalidParameter(format!(
                "cannot merge {} order-{} counts with {} order-{} counts",
                self.mode, self.max_order, other.mode, other.max_order
            )));
        }
        let unigrams = self.unigrams.iter().zip(&other.unigrams).map(|(a, b)| a + b).collect();
        let mut bigrams = self.bigrams.clone();
        for (&k, &v) in &other.bigrams {
            *bigrams.entry(k).or_default() += v;
        }
        let trigrams = match (&self.trigrams, &other.trigrams) {
            (Some(a), Some(b)) => {
                let mut merged = a.clone();
                for (&k, &v) in b {
                    *merged.entry(k).or_default() += v;
                }
                Some(merged)
            }
            _ => None,
        };
        Ok(Self::from_parts(
            self.vocab_size,
            self.vocab_hash.clone(),
            unigrams,
            bigrams,
            trigrams,
            self.max_order,
            self.mode,
        ))
    }

    pub fn mode(&self) -> CorpusMode {
        self.mode
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    /// Fails unless the table was counted over `vocab`.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.len() != self.vocab_size || vocab.fingerprint() != self.vocab_hash {
            return Err(Error::VocabularyMismatch(format!(
                "counts were built over vocabulary {}, got {}",
                short(&self.vocab_hash),
                short(&vocab.fingerprint())
            )));
        }
        Ok(())
    }

    /// c(x)
    pub fn unigram(&self, x: TokenId) -> u64 {
        self.unigrams.get(x as usize).copied().unwrap_or(0)
    }

    /// c(a, b)
    pub fn bigram(&self, a: TokenId, b: TokenId) -> u64 {
        self.bigrams.get(&(a, b)).copied().unwrap_or(0)
    }

    /// c(a, b, c), or 0 when trigrams were not counted.
    pub fn trigram(&self, a: TokenId, b: TokenId, c: TokenId) -> u64 {
        self.trigrams.as_ref().and_then(|t| t.get(&(a, b, c)).copied()).unwrap_or(0)
    }

    /// N1+(x, •): distinct tokens seen after `x`.
    pub fn right_cont(&self, x: TokenId) -> u64 {
        self.right_cont.get(x as usize).copied().unwrap_or(0)
    }

    /// N1+(•, x): distinct tokens seen before `x`.
    pub fn left_cont(&self, x: TokenId) -> u64 {
        self.left_cont.get(x as usize).copied().unwrap_or(0)
    }

    /// Σ_b c(x, b). Equals c(x) except where `x` ends a sequence.
    pub fn context_total(&self, x: TokenId) -> u64 {
        self.context_totals.get(x as usize).copied().unwrap_or(0)
    }

    pub fn bigram_types(&self) -> u64 {
        self.bigram_types
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn is_empty(&self) -> bool {
        self.total_tokens == 0
    }

    pub fn has_trigrams(&self) -> bool {
        self.trigrams.is_some()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn unigram_counts(&self) -> &[u64] {
        &self.unigrams
    }

    pub fn right_conts(&self) -> &[u64] {
        &self.right_cont
    }

    pub fn left_conts(&self) -> &[u64] {
        &self.left_cont
    }

    /// Observed bigrams in ascending (a, b) order.
    pub fn bigrams(&self) -> impl Iterator<Item = ((TokenId, TokenId), u64)> + '_ {
        self.bigrams.iter().map(|(&k, &v)| (k, v))
    }

    /// Observed successors of `a` in ascending order.
    pub fn successors(&self, a: TokenId) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.bigrams.range((a, 0)..=(a, TokenId::MAX)).map(|(&(_, b), &c)| (b, c))
    }

    pub fn trigrams(&self) -> impl Iterator<Item = ((TokenId, TokenId, TokenId), u64)> + '_ {
        self.trigrams.iter().flat_map(|t| t.iter().map(|(&k, &v)| (k, v)))
    }

    /// Ids with a nonzero unigram count, ascending.
    pub fn observed_types(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.unigrams.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i as TokenId)
    }

    /// Canonical TSV serialization.
    pub fn write_tsv<W: Write>(&self, out: W) -> Result<()> {
        self.write_tsv_with_meta(out, &[])
    }

    /// TSV serialization with extra `#key<TAB>value` header lines, which
    /// [`CountTable::read_tsv`] ignores.
    pub fn write_tsv_with_meta<W: Write>(&self, mut out: W, meta: &[(&str, String)]) -> Result<()> {
        writeln!(out, "#{FORMAT_TAG}")?;
        for (k, v) in meta {
            writeln!(out, "#{k}\t{v}")?;
        }
        writeln!(out, "#mode\t{}", self.mode)?;
        writeln!(out, "#max_order\t{}", self.max_order)?;
        writeln!(out, "#total_tokens\t{}", self.total_tokens)?;
        writeln!(out, "#bigram_types\t{}", self.bigram_types)?;
        writeln!(out, "#vocab_size\t{}", self.vocab_size)?;
        writeln!(out, "#vocab_hash\t{}", self.vocab_hash)?;
        for w in &self.warnings {
            writeln!(out, "#warning\t{w}")?;
        }
        writeln!(out, "@unigram")?;
        for (id, &c) in self.unigrams.iter().enumerate().filter(|(_, &c)| c > 0) {
            writeln!(out, "{id}\t{c}")?;
        }
        writeln!(out, "@bigram")?;
        for (&(a, b), &c) in &self.bigrams {
            writeln!(out, "{a}\t{b}\t{c}")?;
        }
        if let Some(tri) = &self.trigrams {
            writeln!(out, "@trigram")?;
            for (&(a, b, c), &n) in tri {
                writeln!(out, "{a}\t{b}\t{c}\t{n}")?;
            }
        }
        writeln!(out, "@right_cont")?;
        for (id, &c) in self.right_cont.iter().enumerate().filter(|(_, &c)| c > 0) {
            writeln!(out, "{id}\t{c}")?;
        }
        writeln!(out, "@left_cont")?;
        for (id, &c) in self.left_cont.iter().enumerate().filter(|(_, &c)| c > 0) {
            writeln!(out, "{id}\t{c}")?;
        }
        Ok(())
    }

    /// Parse the format written by [`CountTable::write_tsv`]. Derived sections
    /// are recomputed from the raw counts and must agree with the file.
    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut header: HashMap<String, String> = HashMap::new();
        let mut section = String::new();
        let mut unigram_rows = Vec::new();
        let mut bigrams = BTreeMap::new();
        let mut trigrams: Option<BTreeMap<_, _>> = None;
        let mut right_rows = Vec::new();
        let mut left_rows = Vec::new();

        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let bad = |message: String| Error::Parse { line: lineno, message };
            if i == 0 {
                if line != format!("#{FORMAT_TAG}") {
                    return Err(bad(format!("expected format tag, found {line:?}")));
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once('\t').ok_or_else(|| bad("malformed header".into()))?;
                if k != "warning" {
                    header.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if let Some(name) = line.strip_prefix('@') {
                section = name.to_string();
                if section == "trigram" {
                    trigrams = Some(BTreeMap::new());
                }
                continue;
            }
            let fields = line
                .split('\t')
                .map(|f| f.parse::<u64>().map_err(|e| bad(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<u64>>>()?;
            let arity = match section.as_str() {
                "unigram" | "right_cont" | "left_cont" => 2,
                "bigram" => 3,
                "trigram" => 4,
                other => return Err(bad(format!("row outside a known section ({other:?})"))),
            };
            if fields.len() != arity {
                return Err(bad(format!("expected {arity} fields, found {}", fields.len())));
            }
            let id = |v: u64| TokenId::try_from(v).map_err(|_| bad(format!("id {v} out of range")));
            match section.as_str() {
                "unigram" => unigram_rows.push((id(fields[0])?, fields[1])),
                "bigram" => {
                    bigrams.insert((id(fields[0])?, id(fields[1])?), fields[2]);
                }
                "trigram" => {
                    if let Some(t) = trigrams.as_mut() {
                        t.insert((id(fields[0])?, id(fields[1])?, id(fields[2])?), fields[3]);
                    }
                }
                "right_cont" => right_rows.push((id(fields[0])?, fields[1])),
                _ => left_rows.push((id(fields[0])?, fields[1])),
            }
        }

        let field =
            |k: &str| header.get(k).ok_or_else(|| Error::Parse { line: 0, message: format!("missing header {k:?}") });
        let num = |k: &str| -> Result<u64> {
            field(k)?.parse().map_err(|e| Error::Parse { line: 0, message: format!("header {k:?}: {e}") })
        };
        let mode: CorpusMode = field("mode")?.parse()?;
        let max_order = num("max_order")? as usize;
        check_order(max_order)?;
        let vocab_size = num("vocab_size")? as usize;
        let vocab_hash = field("vocab_hash")?.clone();
        if max_order == 3 && trigrams.is_none() {
            trigrams = Some(BTreeMap::new());
        }

        let mut unigrams = vec![0u64; vocab_size];
        for (id, c) in unigram_rows {
            *unigrams
                .get_mut(id as usize)
                .ok_or_else(|| Error::Parse { line: 0, message: format!("unigram id {id} out of range") })? = c;
        }
        let in_range = |&(a, b): &(TokenId, TokenId)| (a as usize) < vocab_size && (b as usize) < vocab_size;
        if !bigrams.keys().all(in_range) {
            return Err(Error::Parse { line: 0, message: "bigram id out of range".into() });
        }
        let table = Self::from_parts(vocab_size, vocab_hash, unigrams, bigrams, trigrams, max_order, mode);

        let mismatch = |what: &str| Error::Parse { line: 0, message: format!("{what} disagrees with raw counts") };
        if num("total_tokens")? != table.total_tokens {
            return Err(mismatch("total_tokens"));
        }
        if num("bigram_types")? != table.bigram_types {
            return Err(mismatch("bigram_types"));
        }
        let nonzero = |v: &[u64]| -> Vec<(TokenId, u64)> {
            v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i as TokenId, c)).collect()
        };
        if right_rows != nonzero(&table.right_cont) {
            return Err(mismatch("right_cont"));
        }
        if left_rows != nonzero(&table.left_cont) {
            return Err(mismatch("left_cont"));
        }
        Ok(table)
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(text: &str) -> (Vocabulary, TokenSequence) {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let v = Vocabulary::build(&toks, 0).unwrap();
        let s = v.encode(&toks);
        (v, s)
    }

    #[test]
    fn hand_counted_small_corpus() {
        let (v, s) = setup("a b a b c");
        let t = CountTable::build(&v, &[s], 2, CorpusMode::Continuous).unwrap();
        let (a, b, c) = (v.id("a"), v.id("b"), v.id("c"));
        assert_eq!((t.unigram(a), t.unigram(b), t.unigram(c)), (2, 2, 1));
        assert_eq!((t.bigram(a, b), t.bigram(b, a), t.bigram(b, c)), (2, 1, 1));
        assert_eq!(t.bigram(a, c), 0);
        assert_eq!(t.right_cont(b), 2);
        assert_eq!(t.left_cont(b), 1);
        assert_eq!(t.bigram_types(), 3);
        assert_eq!(t.total_tokens(), 5);
        assert!(t.warnings().is_empty());
    }

    #[test]
    fn repeated_token() {
        let (v, s) = setup("a a a a");
        let t = CountTable::build(&v, &[s], 2, CorpusMode::Continuous).unwrap();
        let a = v.id("a");
        assert_eq!(t.bigram(a, a), 3);
        assert_eq!((t.right_cont(a), t.left_cont(a)), (1, 1));
    }

    #[test]
    fn single_token_warns() {
        let (v, s) = setup("a");
        let t = CountTable::build(&v, &[s], 3, CorpusMode::Continuous).unwrap();
        assert_eq!(t.bigrams().count(), 0);
        assert_eq!(t.warnings().len(), 2);
    }

    #[test]
    fn per_line_prepends_boundary() {
        let (v, _) = setup("a b c");
        let lines = vec![v.encode(["a", "b"]), v.encode(["c"]), TokenSequence::default()];
        let t = CountTable::build(&v, &lines, 2, CorpusMode::PerLine).unwrap();
        assert_eq!(t.unigram(Vocabulary::BOUNDARY), 2);
        assert_eq!(t.bigram(Vocabulary::BOUNDARY, v.id("a")), 1);
        assert_eq!(t.bigram(Vocabulary::BOUNDARY, v.id("c")), 1);
        assert_eq!(t.bigram(v.id("b"), v.id("c")), 0);
        assert_eq!(t.total_tokens(), 5);
    }

    #[test]
    fn empty_input_is_an_error() {
        let (v, _) = setup("a");
        assert!(matches!(
            CountTable::build(&v, &[TokenSequence::default()], 2, CorpusMode::Continuous),
            Err(Error::EmptyCorpus)
        ));
        assert!(CountTable::build(&v, &[v.encode(["a"])], 4, CorpusMode::Continuous).is_err());
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let (v, s) = setup("a b a b c");
        let t = CountTable::build(&v, &[s], 3, CorpusMode::Continuous).unwrap();
        let e = CountTable::empty(&v, 3, CorpusMode::Continuous).unwrap();
        assert_eq!(t.merge(&e).unwrap(), t);
        assert_eq!(e.merge(&t).unwrap(), t);
    }

    #[test]
    fn merge_counts_shared_bigram_type_once() {
        let (v, s) = setup("a b c a b d a b e a");
        let left = TokenSequence::new(s[..5].to_vec());
        let right = TokenSequence::new(s[5..].to_vec());
        let tl = CountTable::build(&v, &[left], 2, CorpusMode::Continuous).unwrap();
        let tr = CountTable::build(&v, &[right], 2, CorpusMode::Continuous).unwrap();
        let m = tl.merge(&tr).unwrap();
        let (a, b) = (v.id("a"), v.id("b"));
        assert_eq!(tl.bigram(a, b) + tr.bigram(a, b), m.bigram(a, b));
        // brute force over the merged bigram set
        let succ: std::collections::BTreeSet<_> =
            m.bigrams().filter(|((x, _), _)| *x == a).map(|((_, y), _)| y).collect();
        assert_eq!(m.right_cont(a), succ.len() as u64);
        assert_eq!(m.right_cont(a), 1);
    }

    #[test]
    fn merge_rejects_other_vocabulary() {
        let (v1, s1) = setup("a b");
        let (v2, s2) = setup("a b c");
        let t1 = CountTable::build(&v1, &[s1], 2, CorpusMode::Continuous).unwrap();
        let t2 = CountTable::build(&v2, &[s2], 2, CorpusMode::Continuous).unwrap();
        assert!(matches!(t1.merge(&t2), Err(Error::VocabularyMismatch(_))));
    }

    #[test]
    fn tsv_layout_and_round_trip() {
        let (v, s) = setup("a b a b c");
        let t = CountTable::build(&v, &[s], 2, CorpusMode::Continuous).unwrap();
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let body: Vec<&str> = text.lines().skip_while(|l| l.starts_with('#')).collect();
        assert_eq!(
            body,
            [
                "@unigram",
                "3\t2",
                "4\t2",
                "5\t1",
                "@bigram",
                "3\t4\t2",
                "4\t3\t1",
                "4\t5\t1",
                "@right_cont",
                "3\t1",
                "4\t2",
                "@left_cont",
                "3\t1",
                "4\t1",
                "5\t1"
            ]
        );
        assert_eq!(CountTable::read_tsv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn tsv_with_inconsistent_continuations_is_rejected() {
        let (v, s) = setup("a b a b c");
        let t = CountTable::build(&v, &[s], 2, CorpusMode::Continuous).unwrap();
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("@right_cont\n3\t1", "@right_cont\n3\t2");
        assert!(CountTable::read_tsv(text.as_bytes()).is_err());
    }
}
