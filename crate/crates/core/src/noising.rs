//! Noising schemes for token sequences.
//!
//! | scheme              | noising probability        | proposal                 | targets noised |
//! |---------------------|----------------------------|--------------------------|----------------|
//! | `blank`             | γ0                         | point mass on `<blank>`  | no             |
//! | `unigram`           | γ0                         | unigram frequency        | no             |
//! | `absolute_discount` | γ0 · N1+(x, •) / c(x)      | unigram frequency        | no             |
//! | `bigram_kn`         | γ0 · N1+(x, •) / c(x)      | q(x) ∝ N1+(•, x)         | yes            |
//!
//! All randomness comes from [`KeyedStream`]: at position `j` of stream
//! `stream_index`, draw 0 gates the replacement, draw 1 picks the replacement
//! input token and draw 2 the replacement target token.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, TokenSequence, Vocabulary};
use crate::counts::CountTable;
use crate::error::{Error, Result};
use crate::rng::KeyedStream;

const GATE_DRAW: u64 = 0;
const INPUT_DRAW: u64 = 1;
const TARGET_DRAW: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Blank,
    Unigram,
    AbsoluteDiscount,
    BigramKn,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Blank, Scheme::Unigram, Scheme::AbsoluteDiscount, Scheme::BigramKn];

    /// The proposal each scheme is paired with.
    pub fn proposal(self) -> ProposalKind {
        match self {
            Scheme::Blank => ProposalKind::BlankPointMass,
            Scheme::Unigram | Scheme::AbsoluteDiscount => ProposalKind::UnigramFrequency,
            Scheme::BigramKn => ProposalKind::LeftContinuation,
        }
    }

    pub fn noises_target(self) -> bool {
        self == Scheme::BigramKn
    }

    /// Whether γ is scaled by the discounting ratio N1+(x, •) / c(x).
    pub fn is_adaptive(self) -> bool {
        matches!(self, Scheme::AbsoluteDiscount | Scheme::BigramKn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Blank => "blank",
            Scheme::Unigram => "unigram",
            Scheme::AbsoluteDiscount => "absolute_discount",
            Scheme::BigramKn => "bigram_kn",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    BlankPointMass,
    UnigramFrequency,
    LeftContinuation,
}

/// A validated noising configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisingConfig {
    scheme: Scheme,
    gamma0: f64,
    noise_target: bool,
    seed: u64,
    proposal: ProposalKind,
}

impl NoisingConfig {
    /// Configuration with the proposal and target flag implied by `scheme`.
    pub fn new(scheme: Scheme, gamma0: f64, seed: u64) -> Result<Self> {
        Self::from_parts(scheme, gamma0, scheme.noises_target(), seed, scheme.proposal())
    }

    /// Configuration from explicit fields; rejects pairings other than the
    /// ones listed in the module table.
    pub fn from_parts(
        scheme: Scheme,
        gamma0: f64,
        noise_target: bool,
        seed: u64,
        proposal: ProposalKind,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma0) {
            return Err(Error::InvalidConfig(format!("gamma0 must lie in [0, 1], got {gamma0}")));
        }
        if proposal != scheme.proposal() {
            return Err(Error::InvalidConfig(format!(
                "scheme {scheme} requires proposal {:?}, got {proposal:?}",
                scheme.proposal()
            )));
        }
        if noise_target != scheme.noises_target() {
            return Err(Error::InvalidConfig(format!(
                "scheme {scheme} {} the prediction target",
                if scheme.noises_target() { "must noise" } else { "must not noise" }
            )));
        }
        Ok(NoisingConfig { scheme, gamma0, noise_target, seed, proposal })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn noise_target(&self) -> bool {
        self.noise_target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn proposal(&self) -> ProposalKind {
        self.proposal
    }

    /// The same configuration with a different base rate.
    pub fn with_gamma0(&self, gamma0: f64) -> Result<Self> {
        Self::from_parts(self.scheme, gamma0, self.noise_target, self.seed, self.proposal)
    }
}

/// Distribution replacement tokens are drawn from.
///
/// Backed by integer weights so inverse-CDF sampling is exact and
/// zero-weight tokens can never be drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalDistribution {
    kind: ProposalKind,
    probs: Vec<f64>,
    cumulative: Vec<u64>,
}

impl ProposalDistribution {
    /// Proposal over the table's vocabulary. The unigram and continuation
    /// proposals exclude `<blank>` and `<s>` but keep `<unk>`.
    pub fn build(table: &CountTable, kind: ProposalKind) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyTable);
        }
        let n = table.vocab_size();
        let mut weights = vec![0u64; n];
        match kind {
            ProposalKind::BlankPointMass => weights[Vocabulary::BLANK as usize] = 1,
            ProposalKind::UnigramFrequency => weights.copy_from_slice(table.unigram_counts()),
            ProposalKind::LeftContinuation => weights.copy_from_slice(table.left_conts()),
        }
        if kind != ProposalKind::BlankPointMass {
            weights[Vocabulary::BLANK as usize] = 0;
            weights[Vocabulary::BOUNDARY as usize] = 0;
        }
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return Err(Error::EmptyTable);
        }
        let probs = weights.iter().map(|&w| w as f64 / total as f64).collect();
        let cumulative = weights
            .iter()
            .scan(0u64, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(ProposalDistribution { kind, probs, cumulative })
    }

    pub fn kind(&self) -> ProposalKind {
        self.kind
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: TokenId) -> f64 {
        self.probs.get(x as usize).copied().unwrap_or(0.0)
    }

    /// Inverse CDF over ascending id, driven by 64 uniform random bits.
    #[inline]
    pub fn sample(&self, bits: u64) -> TokenId {
        let total = *self.cumulative.last().expect("non-empty proposal");
        let target = ((bits as u128 * total as u128) >> 64) as u64;
        self.cumulative.partition_point(|&c| c <= target) as TokenId
    }
}

/// Noised inputs and targets with a per-position record of where noising fired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisedBatch {
    pub x_tilde: TokenSequence,
    pub y_tilde: TokenSequence,
    pub swap_mask: Vec<bool>,
}

impl NoisedBatch {
    pub fn swaps(&self) -> usize {
        self.swap_mask.iter().filter(|&&m| m).count()
    }

    pub fn swap_fraction(&self) -> f64 {
        if self.swap_mask.is_empty() {
            0.0
        } else {
            self.swaps() as f64 / self.swap_mask.len() as f64
        }
    }
}

/// Which sides of a parallel pair get noised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSides {
    Both,
    SourceOnly,
    TargetOnly,
}

/// Stream index for sequence `sequence` of epoch `epoch`.
pub fn sequence_stream(epoch: u64, sequence: u64) -> u64 {
    (epoch << 32) ^ sequence
}

/// A configuration bound to count statistics and its proposal.
#[derive(Debug, Clone)]
pub struct Noiser<'a> {
    table: &'a CountTable,
    config: NoisingConfig,
    proposal: ProposalDistribution,
    gammas: Vec<f64>,
}

impl<'a> Noiser<'a> {
    pub fn new(table: &'a CountTable, config: NoisingConfig) -> Result<Self> {
        let proposal = ProposalDistribution::build(table, config.proposal())?;
        let gammas = (0..table.vocab_size() as TokenId).map(|x| gamma_for(table, &config, x)).collect();
        Ok(Noiser { table, config, proposal, gammas })
    }

    pub fn config(&self) -> &NoisingConfig {
        &self.config
    }

    pub fn table(&self) -> &CountTable {
        self.table
    }

    pub fn proposal(&self) -> &ProposalDistribution {
        &self.proposal
    }

    /// Noising probability for context token `x`.
    #[inline]
    pub fn gamma(&self, x: TokenId) -> f64 {
        self.gammas.get(x as usize).copied().unwrap_or(self.config.gamma0)
    }

    /// Mean noising probability over the positions of `x`.
    pub fn mean_gamma(&self, x: &[TokenId]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        x.iter().map(|&t| self.gamma(t)).sum::<f64>() / x.len() as f64
    }

    pub fn stream(&self, stream_index: u64) -> KeyedStream {
        KeyedStream::new(self.config.seed, stream_index)
    }

    /// Run the context gate over every position of `x`, calling `visit(j, Some(z))`
    /// when position `j` is replaced by `z` and `visit(j, None)` when it is kept.
    #[inline]
    pub fn visit_context(&self, x: &[TokenId], stream: KeyedStream, mut visit: impl FnMut(usize, Option<TokenId>)) {
        for (j, &tok) in x.iter().enumerate() {
            let pos = j as u64;
            if stream.bernoulli(pos, GATE_DRAW, self.gamma(tok)) {
                visit(j, Some(self.proposal.sample(stream.bits(pos, INPUT_DRAW))));
            } else {
                visit(j, None);
            }
        }
    }

    fn noise_context(&self, x: &TokenSequence, stream: KeyedStream) -> NoisedBatch {
        let mut x_tilde = x.to_vec();
        let mut swap_mask = vec![false; x.len()];
        self.visit_context(x, stream, |j, z| {
            if let Some(z) = z {
                x_tilde[j] = z;
                swap_mask[j] = true;
            }
        });
        NoisedBatch { x_tilde: x_tilde.into(), y_tilde: x.clone(), swap_mask }
    }

    /// Noise every position of `x` with the configured γ and proposal.
    /// The target side is returned unchanged (`y_tilde == x`).
    pub fn noise_sequence(&self, x: &TokenSequence, stream_index: u64) -> NoisedBatch {
        self.noise_context(x, self.stream(stream_index))
    }

    /// Bigram Kneser-Ney noising of an aligned input/target pair.
    ///
    /// At each position one Bernoulli(γ0 · N1+(x_j, •) / c(x_j)) trial gates
    /// both replacements; on success `x̃_j` and `ỹ_j` are drawn independently
    /// from q(x) ∝ N1+(•, x).
    pub fn noise_bigram_kn(&self, x: &TokenSequence, y: &TokenSequence, stream_index: u64) -> Result<NoisedBatch> {
        if self.config.scheme != Scheme::BigramKn {
            return Err(Error::InvalidConfig(format!(
                "bigram Kneser-Ney noising needs scheme bigram_kn, configured {}",
                self.config.scheme
            )));
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { inputs: x.len(), targets: y.len() });
        }
        let stream = self.stream(stream_index);
        let mut x_tilde = x.to_vec();
        let mut y_tilde = y.to_vec();
        let mut swap_mask = vec![false; x.len()];
        for j in 0..x.len() {
            let pos = j as u64;
            let gamma = self.gamma(x[j]);
            if stream.bernoulli(pos, GATE_DRAW, gamma) {
                x_tilde[j] = self.proposal.sample(stream.bits(pos, INPUT_DRAW));
                y_tilde[j] = self.proposal.sample(stream.bits(pos, TARGET_DRAW));
                swap_mask[j] = true;
            }
        }
        Ok(NoisedBatch { x_tilde: x_tilde.into(), y_tilde: y_tilde.into(), swap_mask })
    }

    /// Language-model batch: inputs `seq[..n-1]`, targets `seq[1..]`.
    ///
    /// Context-only schemes leave the targets untouched; `bigram_kn` noises both.
    pub fn noise_lm(&self, seq: &TokenSequence, stream_index: u64) -> NoisedBatch {
        if seq.len() < 2 {
            let empty = TokenSequence::default();
            return NoisedBatch { x_tilde: empty.clone(), y_tilde: empty, swap_mask: Vec::new() };
        }
        let x = TokenSequence::new(seq[..seq.len() - 1].to_vec());
        let y = TokenSequence::new(seq[1..].to_vec());
        if self.config.noise_target {
            self.noise_bigram_kn(&x, &y, stream_index).expect("aligned inputs under a bigram_kn configuration")
        } else {
            let mut batch = self.noise_context(&x, self.stream(stream_index));
            batch.y_tilde = y;
            batch
        }
    }

    /// Noise a batch of language-model sequences in parallel. Sequence `i`
    /// uses stream [`sequence_stream`]`(epoch, i)`, so results do not depend
    /// on thread count or on how the batch is split.
    pub fn noise_batch(&self, seqs: &[TokenSequence], epoch: u64) -> Vec<NoisedBatch> {
        seqs.par_iter().enumerate().map(|(i, s)| self.noise_lm(s, sequence_stream(epoch, i as u64))).collect()
    }
}

/// Noising probability of context token `x1` under `config`.
///
/// Fixed-rate schemes return γ0. Adaptive schemes return
/// γ0 · N1+(x1, •) / c(x1) clipped to [0, 1], falling back to γ0 for tokens
/// absent from the table.
pub fn gamma_for(table: &CountTable, config: &NoisingConfig, x1: TokenId) -> f64 {
    let gamma0 = config.gamma0();
    if !config.scheme().is_adaptive() {
        return gamma0;
    }
    let count = table.unigram(x1);
    if count == 0 {
        return gamma0;
    }
    // Ratio first: N1+(x1, •) ≤ c(x1), so the rounded ratio is at most 1 and
    // the product never exceeds γ0.
    (gamma0 * (table.right_cont(x1) as f64 / count as f64)).clamp(0.0, 1.0)
}

/// Noises source and target sequences independently, each with its own
/// count statistics, on separate sub-streams of the configured seed.
#[derive(Debug, Clone)]
pub struct PairNoiser<'a> {
    source: Noiser<'a>,
    target: Noiser<'a>,
}

impl<'a> PairNoiser<'a> {
    pub fn new(source_table: &'a CountTable, target_table: &'a CountTable, config: NoisingConfig) -> Result<Self> {
        Ok(PairNoiser { source: Noiser::new(source_table, config)?, target: Noiser::new(target_table, config)? })
    }

    pub fn source(&self) -> &Noiser<'a> {
        &self.source
    }

    pub fn target(&self) -> &Noiser<'a> {
        &self.target
    }

    pub fn noise_parallel_pair(
        &self,
        src: &TokenSequence,
        tgt: &TokenSequence,
        stream_index: u64,
        sides: PairSides,
    ) -> (NoisedBatch, NoisedBatch) {
        let stream = self.source.stream(stream_index);
        let untouched =
            |s: &TokenSequence| NoisedBatch { x_tilde: s.clone(), y_tilde: s.clone(), swap_mask: vec![false; s.len()] };
        let src_out = match sides {
            PairSides::Both | PairSides::SourceOnly => self.source.noise_context(src, stream.substream(0)),
            PairSides::TargetOnly => untouched(src),
        };
        let tgt_out = match sides {
            PairSides::Both | PairSides::TargetOnly => self.target.noise_context(tgt, stream.substream(1)),
            PairSides::SourceOnly => untouched(tgt),
        };
        (src_out, tgt_out)
    }
}
