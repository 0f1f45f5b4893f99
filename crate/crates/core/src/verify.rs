//! Exact and Monte-Carlo checks relating noising to smoothing.
//!
//! Under unigram noising of the context at rate γ, the expected bigram count
//! of `(a, b)` is `(1 - γ) c(a, b) + γ p(a) c(b)`. Normalizing those
//! pseudocounts per context reproduces the interpolated estimator with
//! λ = 1 - γ. Blank noising of a trigram context gives an exact mixture of
//! the full, partially blanked and fully blanked predictors.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{CorpusMode, TokenId, TokenSequence, Vocabulary};
use crate::counts::CountTable;
use crate::error::{Error, Result};
use crate::noising::{Noiser, NoisingConfig, Scheme};
use crate::smoothing::{perplexity_of_events, BigramModel};

pub const DEFAULT_FLOOR: f64 = 5.0;
pub const MAX_MIXTURE_CONTEXT: usize = 20;
pub const KL_FLOOR_EPSILON: f64 = 1e-10;

/// Dense accumulators are used up to this many vocabulary pairs.
const DENSE_PAIR_LIMIT: usize = 1 << 22;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

fn require_continuous(table: &CountTable) -> Result<()> {
    if table.mode() != CorpusMode::Continuous {
        return Err(Error::WrongMode { expected: "continuous", found: table.mode().as_str() });
    }
    Ok(())
}

/// Closed-form expected bigram counts under unigram context noising.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticPseudocounts<'a> {
    table: &'a CountTable,
    gamma: f64,
}

pub fn analytic_pseudocounts(table: &CountTable, gamma: f64) -> Result<AnalyticPseudocounts<'_>> {
    check_gamma(gamma)?;
    require_continuous(table)?;
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(AnalyticPseudocounts { table, gamma })
}

impl AnalyticPseudocounts<'_> {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// (1 - γ) c(a, b) + γ (c(a) / T) c(b)
    pub fn get(&self, a: TokenId, b: TokenId) -> f64 {
        let t = self.table;
        let p_a = t.unigram(a) as f64 / t.total_tokens() as f64;
        (1.0 - self.gamma) * t.bigram(a, b) as f64 + self.gamma * p_a * t.unigram(b) as f64
    }

    /// Σ_b c̃(a, b), summed term by term.
    pub fn row_total(&self, a: TokenId) -> f64 {
        (0..self.table.vocab_size() as TokenId).map(|b| self.get(a, b)).sum()
    }

    /// c̃(a, b) / Σ_b' c̃(a, b').
    pub fn normalized(&self, a: TokenId, b: TokenId) -> f64 {
        self.get(a, b) / self.row_total(a)
    }

    /// Pairs of observed types with a nonzero pseudocount, ascending.
    pub fn nonzero(&self) -> impl Iterator<Item = ((TokenId, TokenId), f64)> + '_ {
        let types: Vec<TokenId> = self.table.observed_types().collect();
        let types2 = types.clone();
        types.into_iter().flat_map(move |a| {
            types2.clone().into_iter().map(move |b| ((a, b), self.get(a, b))).filter(|&(_, v)| v > 0.0)
        })
    }
}

/// Mean bigram counts of independently noised copies of a corpus.
///
/// Only the context token of each bigram is noised: the count of `(a, b)`
/// tallies positions `j` where the noised `x̃_j` is `a` and the original
/// `x_{j+1}` is `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalPseudocounts {
    n_samples: u64,
    sums: BTreeMap<(TokenId, TokenId), u64>,
}

impl EmpiricalPseudocounts {
    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn get(&self, a: TokenId, b: TokenId) -> f64 {
        self.sums.get(&(a, b)).copied().unwrap_or(0) as f64 / self.n_samples as f64
    }

    /// Summed counts over all samples, ascending.
    pub fn sums(&self) -> impl Iterator<Item = ((TokenId, TokenId), u64)> + '_ {
        self.sums.iter().map(|(&k, &v)| (k, v))
    }
}

enum PairAccumulator {
    Dense { width: usize, cells: Vec<u64> },
    Sparse(HashMap<u64, u64>),
}

impl PairAccumulator {
    fn new(vocab_size: usize) -> Self {
        if vocab_size * vocab_size <= DENSE_PAIR_LIMIT {
            PairAccumulator::Dense { width: vocab_size, cells: vec![0; vocab_size * vocab_size] }
        } else {
            PairAccumulator::Sparse(HashMap::new())
        }
    }

    #[inline]
    fn add(&mut self, a: TokenId, b: TokenId, n: u64) {
        match self {
            PairAccumulator::Dense { width, cells } => cells[a as usize * *width + b as usize] += n,
            PairAccumulator::Sparse(map) => *map.entry(((a as u64) << 32) | b as u64).or_default() += n,
        }
    }

    fn merge(mut self, other: PairAccumulator) -> PairAccumulator {
        match other {
            PairAccumulator::Dense { width, cells } => {
                for (i, &n) in cells.iter().enumerate().filter(|(_, &n)| n > 0) {
                    self.add((i / width) as TokenId, (i % width) as TokenId, n);
                }
            }
            PairAccumulator::Sparse(map) => {
                for (k, n) in map {
                    self.add((k >> 32) as TokenId, k as TokenId, n);
                }
            }
        }
        self
    }

    fn into_map(self) -> BTreeMap<(TokenId, TokenId), u64> {
        match self {
            PairAccumulator::Dense { width, cells } => cells
                .into_iter()
                .enumerate()
                .filter(|&(_, n)| n > 0)
                .map(|(i, n)| (((i / width) as TokenId, (i % width) as TokenId), n))
                .collect(),
            PairAccumulator::Sparse(map) => {
                map.into_iter().map(|(k, n)| (((k >> 32) as TokenId, k as TokenId), n)).collect()
            }
        }
    }
}

/// Monte-Carlo pseudocounts from `n_samples` unigram noisings of `seq`.
///
/// Replica `r` uses stream index `r` of the unigram noiser seeded with `seed`;
/// sums are integers, so results do not depend on the parallel schedule.
pub fn empirical_pseudocounts(
    seq: &TokenSequence,
    table: &CountTable,
    gamma: f64,
    n_samples: u64,
    seed: u64,
) -> Result<EmpiricalPseudocounts> {
    check_gamma(gamma)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if seq.len() < 2 {
        return Err(Error::EmptyCorpus);
    }
    let noiser = Noiser::new(table, NoisingConfig::new(Scheme::Unigram, gamma, seed)?)?;
    let contexts = &seq[..seq.len() - 1];
    let targets = &seq[1..];
    let vocab_size = table.vocab_size();

    let (acc, kept) = (0..n_samples)
        .into_par_iter()
        .fold(
            || (PairAccumulator::new(vocab_size), vec![0u64; contexts.len()]),
            |(mut acc, mut kept), replica| {
                noiser.visit_context(contexts, noiser.stream(replica), |j, z| match z {
                    Some(z) => acc.add(z, targets[j], 1),
                    None => kept[j] += 1,
                });
                (acc, kept)
            },
        )
        .reduce(
            || (PairAccumulator::new(vocab_size), vec![0u64; contexts.len()]),
            |(a, mut ka), (b, kb)| {
                for (x, y) in ka.iter_mut().zip(kb) {
                    *x += y;
                }
                (a.merge(b), ka)
            },
        );
    let mut acc = acc;
    for (j, &k) in kept.iter().enumerate().filter(|(_, &k)| k > 0) {
        acc.add(contexts[j], targets[j], k);
    }
    Ok(EmpiricalPseudocounts { n_samples, sums: acc.into_map() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigramComparison {
    pub x1: TokenId,
    pub x2: TokenId,
    pub analytic_count: f64,
    pub empirical_count: f64,
    /// Present only where the analytic count reaches the report floor.
    pub relative_error: Option<f64>,
}

/// Per-bigram comparison of analytic and Monte-Carlo pseudocounts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub gamma: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub floor: f64,
    pub compared: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub per_bigram: Vec<BigramComparison>,
}

/// Compare pseudocounts over every bigram that was observed or whose
/// analytic count reaches `floor`.
pub fn equivalence_report(
    seq: &TokenSequence,
    table: &CountTable,
    gamma: f64,
    n_samples: u64,
    seed: u64,
    floor: f64,
) -> Result<EquivalenceReport> {
    let analytic = analytic_pseudocounts(table, gamma)?;
    let empirical = empirical_pseudocounts(seq, table, gamma, n_samples, seed)?;
    Ok(compare_pseudocounts(&analytic, &empirical, seed, floor))
}

pub fn compare_pseudocounts(
    analytic: &AnalyticPseudocounts<'_>,
    empirical: &EmpiricalPseudocounts,
    seed: u64,
    floor: f64,
) -> EquivalenceReport {
    let mut per_bigram = Vec::new();
    let (mut max_err, mut sum_err, mut compared) = (0.0f64, 0.0, 0usize);
    for ((x1, x2), analytic_count) in analytic.nonzero() {
        let observed = analytic.table.bigram(x1, x2) > 0;
        if analytic_count < floor && !observed {
            continue;
        }
        let empirical_count = empirical.get(x1, x2);
        let relative_error =
            (analytic_count >= floor).then(|| (empirical_count - analytic_count).abs() / analytic_count);
        if let Some(e) = relative_error {
            max_err = max_err.max(e);
            sum_err += e;
            compared += 1;
        }
        per_bigram.push(BigramComparison { x1, x2, analytic_count, empirical_count, relative_error });
    }
    EquivalenceReport {
        gamma: analytic.gamma,
        n_samples: empirical.n_samples,
        seed,
        floor,
        compared,
        max_rel_error: max_err,
        mean_rel_error: if compared > 0 { sum_err / compared as f64 } else { 0.0 },
        per_bigram,
    }
}

/// MLE over Monte-Carlo pseudocounts: the count model a noised corpus induces.
/// Contexts without pseudocounts back off to the unigram distribution.
#[derive(Debug, Clone)]
pub struct NoisedEmpiricalModel<'a> {
    table: &'a CountTable,
    counts: &'a EmpiricalPseudocounts,
    rows: Vec<u64>,
}

impl<'a> NoisedEmpiricalModel<'a> {
    pub fn new(table: &'a CountTable, counts: &'a EmpiricalPseudocounts) -> Self {
        let mut rows = vec![0u64; table.vocab_size()];
        for ((a, _), n) in counts.sums() {
            rows[a as usize] += n;
        }
        NoisedEmpiricalModel { table, counts, rows }
    }
}

impl BigramModel for NoisedEmpiricalModel<'_> {
    fn prob(&self, x1: TokenId, x2: TokenId) -> f64 {
        match self.rows.get(x1 as usize).copied().unwrap_or(0) {
            0 => self.table.unigram(x2) as f64 / self.table.total_tokens() as f64,
            row => self.counts.sums.get(&(x1, x2)).copied().unwrap_or(0) as f64 / row as f64,
        }
    }

    fn vocab_size(&self) -> usize {
        self.table.vocab_size()
    }
}

/// Per-subset mixture weights of independent context noising.
///
/// Subsets are bit masks over context positions; bit `i` set means position
/// `i` is kept. A subset keeping `k` of `n` positions has weight
/// (1 - γ)^k γ^(n - k).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDecomposition {
    pub context_len: usize,
    pub gamma: f64,
    pub weights: Vec<f64>,
}

impl MixtureDecomposition {
    pub fn weight(&self, kept_mask: usize) -> f64 {
        self.weights[kept_mask]
    }

    /// Compensated sum of all subset weights.
    pub fn total(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &w in &self.weights {
            let t = sum + w;
            comp += if sum.abs() >= w.abs() { (sum - t) + w } else { (w - t) + sum };
            sum = t;
        }
        sum + comp
    }
}

pub fn mixture_weights(context_len: usize, gamma: f64) -> Result<MixtureDecomposition> {
    check_gamma(gamma)?;
    if context_len > MAX_MIXTURE_CONTEXT {
        return Err(Error::ContextTooLong { len: context_len, cap: MAX_MIXTURE_CONTEXT });
    }
    let by_kept: Vec<f64> =
        (0..=context_len).map(|k| (1.0 - gamma).powi(k as i32) * gamma.powi((context_len - k) as i32)).collect();
    let weights = (0..1usize << context_len).map(|mask| by_kept[mask.count_ones() as usize]).collect();
    Ok(MixtureDecomposition { context_len, gamma, weights })
}

/// Trigram predictors over blank-noised contexts.
///
/// Built by adding every trigram occurrence under all four blanking patterns
/// of its context, i.e. the counts of the exhaustively blank-noised corpus.
#[derive(Debug, Clone)]
pub struct BlankMixture<'a> {
    table: &'a CountTable,
    augmented: HashMap<(TokenId, TokenId, TokenId), u64>,
    contexts: HashMap<(TokenId, TokenId), u64>,
}

impl<'a> BlankMixture<'a> {
    pub fn new(table: &'a CountTable) -> Result<Self> {
        if !table.has_trigrams() {
            return Err(Error::InvalidParameter("blank mixture needs trigram counts (max_order 3)".into()));
        }
        let blank = Vocabulary::BLANK;
        let mut augmented = HashMap::new();
        let mut contexts = HashMap::new();
        for ((w1, w2, w3), c) in table.trigrams() {
            for mask in 0..4u8 {
                let ctx = (if mask & 1 != 0 { w1 } else { blank }, if mask & 2 != 0 { w2 } else { blank });
                *augmented.entry((ctx.0, ctx.1, w3)).or_insert(0) += c;
                *contexts.entry(ctx).or_insert(0) += c;
            }
        }
        Ok(BlankMixture { table, augmented, contexts })
    }

    fn predict(&self, c1: TokenId, c2: TokenId, x3: TokenId) -> f64 {
        let n = self.augmented.get(&(c1, c2, x3)).copied().unwrap_or(0);
        n as f64 / self.contexts[&(c1, c2)] as f64
    }

    /// Expected prediction over the four blank-noising patterns, by enumeration.
    pub fn enumerate(&self, x1: TokenId, x2: TokenId, x3: TokenId, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        self.check_context(x1, x2)?;
        let mut expectation = 0.0;
        for mask in 0..4u8 {
            let (keep1, keep2) = (mask & 1 != 0, mask & 2 != 0);
            let p1 = if keep1 { 1.0 - gamma } else { gamma };
            let p2 = if keep2 { 1.0 - gamma } else { gamma };
            let ctx1 = if keep1 { x1 } else { Vocabulary::BLANK };
            let ctx2 = if keep2 { x2 } else { Vocabulary::BLANK };
            expectation += p1 * p2 * self.predict(ctx1, ctx2, x3);
        }
        Ok(expectation)
    }

    /// π(2) p(x3|x1,x2) + π(1) p(x3|x1,_) + π(1) p(x3|_,x2) + π(0) p(x3|_,_),
    /// with blanked-context predictors taken as marginals of the trigram counts.
    pub fn mixture(&self, x1: TokenId, x2: TokenId, x3: TokenId, gamma: f64) -> Result<f64> {
        self.check_context(x1, x2)?;
        let pi = mixture_weights(2, gamma)?;
        let marginal = |keep: fn(TokenId, TokenId, TokenId, TokenId) -> bool| {
            let (mut num, mut den) = (0u64, 0u64);
            for ((w1, w2, w3), c) in self.table.trigrams() {
                if keep(w1, w2, x1, x2) {
                    den += c;
                    if w3 == x3 {
                        num += c;
                    }
                }
            }
            num as f64 / den as f64
        };
        let full = marginal(|w1, w2, x1, x2| w1 == x1 && w2 == x2);
        let left = marginal(|w1, _, x1, _| w1 == x1);
        let right = marginal(|_, w2, _, x2| w2 == x2);
        let none = marginal(|_, _, _, _| true);
        Ok(pi.weight(0b11) * full + pi.weight(0b01) * left + pi.weight(0b10) * right + pi.weight(0b00) * none)
    }

    fn check_context(&self, x1: TokenId, x2: TokenId) -> Result<()> {
        if self.contexts.contains_key(&(x1, x2)) && x1 != Vocabulary::BLANK && x2 != Vocabulary::BLANK {
            Ok(())
        } else {
            Err(Error::UnseenContext(x1.to_string(), x2.to_string()))
        }
    }
}

/// `(enumeration, mixture)` for predicting `x3` after `(x1, x2)` under blank noising.
pub fn blank_mixture_exact(
    table: &CountTable,
    x1: TokenId,
    x2: TokenId,
    x3: TokenId,
    gamma: f64,
) -> Result<(f64, f64)> {
    let bm = BlankMixture::new(table)?;
    Ok((bm.enumerate(x1, x2, x3, gamma)?, bm.mixture(x1, x2, x3, gamma)?))
}

/// Reference distribution for KL reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KlReference {
    Uniform,
    Unigram,
}

/// A model with ε added to every observed type, renormalized, so that its
/// divergence from the unigram distribution is finite.
#[derive(Debug, Clone)]
pub struct FlooredModel<M> {
    inner: M,
    support: Vec<bool>,
    support_size: usize,
    epsilon: f64,
}

impl<M: BigramModel> FlooredModel<M> {
    pub fn new(inner: M, table: &CountTable, epsilon: f64) -> Self {
        let support: Vec<bool> = table.unigram_counts().iter().map(|&c| c > 0).collect();
        let support_size = support.iter().filter(|&&s| s).count();
        FlooredModel { inner, support, support_size, epsilon }
    }
}

impl<M: BigramModel> BigramModel for FlooredModel<M> {
    fn prob(&self, x1: TokenId, x2: TokenId) -> f64 {
        let bump = if self.support.get(x2 as usize).copied().unwrap_or(false) { self.epsilon } else { 0.0 };
        (self.inner.prob(x1, x2) + bump) / (1.0 + self.epsilon * self.support_size as f64)
    }

    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlReport {
    pub reference: KlReference,
    pub positions: usize,
    pub finite_positions: usize,
    pub infinite_positions: usize,
    /// Mean over finite positions; `None` if there are none.
    pub mean_kl: Option<f64>,
}

/// D_KL(p ‖ q) = Σ p_i ln(p_i / q_i); infinite if p puts mass where q has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            kl += pi * (pi / qi).ln();
        }
    }
    kl
}

/// Mean KL divergence from the model's predictive distribution at each
/// scored held-out event to the reference distribution.
pub fn kl_report<M: BigramModel>(
    model: &M,
    table: &CountTable,
    reference: KlReference,
    events: &[(TokenId, TokenId)],
) -> Result<KlReport> {
    let v = model.vocab_size();
    let q: Vec<f64> = match reference {
        KlReference::Uniform => vec![1.0 / v as f64; v],
        KlReference::Unigram => {
            table.unigram_counts().iter().map(|&c| c as f64 / table.total_tokens() as f64).collect()
        }
    };
    let mut cache: HashMap<TokenId, f64> = HashMap::new();
    let (mut sum, mut finite, mut infinite) = (0.0, 0usize, 0usize);
    for &(ctx, _) in events {
        let kl = *cache.entry(ctx).or_insert_with(|| kl_divergence(&model.distribution(ctx), &q));
        if kl.is_finite() {
            sum += kl;
            finite += 1;
        } else {
            infinite += 1;
        }
    }
    Ok(KlReport {
        reference,
        positions: events.len(),
        finite_positions: finite,
        infinite_positions: infinite,
        mean_kl: (finite > 0).then(|| sum / finite as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPerplexity {
    pub model: String,
    /// `None` when infinite.
    pub perplexity: Option<f64>,
    pub zero_prob_positions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnseenSection {
    /// Held-out positions of the predicted token.
    pub positions: Vec<usize>,
    pub models: Vec<ModelPerplexity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnseenReport {
    pub heldout_tokens: usize,
    pub unseen_bigrams: UnseenSection,
    /// Present when the training table holds trigram counts.
    pub unseen_trigrams: Option<UnseenSection>,
}

/// Perplexity of each model on held-out positions whose bigram (and,
/// separately, trigram) never occurred in training.
pub fn unseen_ngram_report(
    train: &CountTable,
    heldout: &TokenSequence,
    models: &[(&str, &dyn BigramModel)],
) -> Result<UnseenReport> {
    let bigram_positions: Vec<usize> =
        (1..heldout.len()).filter(|&i| train.bigram(heldout[i - 1], heldout[i]) == 0).collect();
    let section = |positions: Vec<usize>| -> Result<UnseenSection> {
        let events: Vec<(TokenId, TokenId)> = positions.iter().map(|&i| (heldout[i - 1], heldout[i])).collect();
        let models = models
            .iter()
            .map(|(name, m)| {
                if events.is_empty() {
                    return Ok(ModelPerplexity { model: name.to_string(), perplexity: None, zero_prob_positions: 0 });
                }
                let ppl = perplexity_of_events(m, &events)?;
                Ok(ModelPerplexity {
                    model: name.to_string(),
                    perplexity: ppl.is_finite().then(|| ppl.value()),
                    zero_prob_positions: match &ppl {
                        crate::smoothing::Perplexity::Infinite { zero_positions } => zero_positions.len(),
                        _ => 0,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UnseenSection { positions, models })
    };
    let unseen_trigrams = if train.has_trigrams() {
        let positions =
            (2..heldout.len()).filter(|&i| train.trigram(heldout[i - 2], heldout[i - 1], heldout[i]) == 0).collect();
        Some(section(positions)?)
    } else {
        None
    };
    Ok(UnseenReport { heldout_tokens: heldout.len(), unseen_bigrams: section(bigram_positions)?, unseen_trigrams })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{Estimator, SmoothedModel};

    fn setup(text: &str, order: usize) -> (Vocabulary, TokenSequence, CountTable) {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let v = Vocabulary::build(&toks, 0).unwrap();
        let s = v.encode(&toks);
        let t = CountTable::build(&v, std::slice::from_ref(&s), order, CorpusMode::Continuous).unwrap();
        (v, s, t)
    }

    #[test]
    fn analytic_hand_values() {
        let (v, _, t) = setup("a b a b c", 2);
        let (a, b) = (v.id("a"), v.id("b"));
        assert_eq!(analytic_pseudocounts(&t, 0.0).unwrap().get(a, b), 2.0);
        assert!((analytic_pseudocounts(&t, 1.0).unwrap().get(a, b) - 0.8).abs() < 1e-15);
        assert!((analytic_pseudocounts(&t, 0.5).unwrap().get(a, b) - 1.4).abs() < 1e-15);
        for ((x, y), c) in t.bigrams() {
            assert_eq!(analytic_pseudocounts(&t, 0.0).unwrap().get(x, y), c as f64);
        }
    }

    #[test]
    fn analytic_requires_continuous_counts() {
        let v = Vocabulary::build(["a", "b"], 0).unwrap();
        let t = CountTable::build(&v, &[v.encode(["a", "b"])], 2, CorpusMode::PerLine).unwrap();
        assert!(matches!(analytic_pseudocounts(&t, 0.2), Err(Error::WrongMode { .. })));
    }

    #[test]
    fn empirical_without_noise_is_raw_counts() {
        let (_, s, t) = setup("a b a b c a c c b a", 2);
        let e = empirical_pseudocounts(&s, &t, 0.0, 3, 1).unwrap();
        let raw: Vec<_> = t.bigrams().map(|(k, c)| (k, c * 3)).collect();
        assert_eq!(e.sums().collect::<Vec<_>>(), raw);
    }

    #[test]
    fn empirical_is_reproducible() {
        let (_, s, t) = setup("a b a b c a c c b a b b c", 2);
        let a = empirical_pseudocounts(&s, &t, 0.3, 50, 7).unwrap();
        assert_eq!(a, empirical_pseudocounts(&s, &t, 0.3, 50, 7).unwrap());
        assert_ne!(a, empirical_pseudocounts(&s, &t, 0.3, 50, 8).unwrap());
    }

    #[test]
    fn empirical_total_is_number_of_bigrams() {
        let (_, s, t) = setup("a b a b c a c c b a b b c", 2);
        let e = empirical_pseudocounts(&s, &t, 0.6, 40, 2).unwrap();
        let total: u64 = e.sums().map(|(_, n)| n).sum();
        assert_eq!(total, 40 * (s.len() as u64 - 1));
    }

    #[test]
    fn normalized_pseudocounts_are_interpolation() {
        let (_, _, t) = setup("a b a b c a c c b a b b c a d a", 2);
        for gamma in [0.1, 0.25, 0.5] {
            let ap = analytic_pseudocounts(&t, gamma).unwrap();
            let interp = SmoothedModel::new(&t, Estimator::Interpolated { lambda: 1.0 - gamma }).unwrap();
            for a in t.observed_types().filter(|&a| t.context_total(a) == t.unigram(a)) {
                for b in 0..t.vocab_size() as TokenId {
                    assert!((ap.normalized(a, b) - interp.prob(a, b)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixture_weight_cases() {
        let one = mixture_weights(1, 0.3).unwrap();
        assert_eq!(one.weights, vec![0.3, 0.7]);
        let two = mixture_weights(2, 0.5).unwrap();
        assert_eq!(two.weights, vec![0.25; 4]);
        assert!(matches!(mixture_weights(21, 0.5), Err(Error::ContextTooLong { .. })));
        assert!((mixture_weights(20, 0.37).unwrap().total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blank_mixture_limits() {
        let (v, _, t) = setup("a b c a b d a c c b a b c", 3);
        let (a, b, c) = (v.id("a"), v.id("b"), v.id("c"));
        let bm = BlankMixture::new(&t).unwrap();
        let full = t.trigram(a, b, c) as f64
            / t.trigrams().filter(|((x, y, _), _)| *x == a && *y == b).map(|(_, n)| n).sum::<u64>() as f64;
        let (lhs, rhs) = blank_mixture_exact(&t, a, b, c, 0.0).unwrap();
        assert!((lhs - full).abs() < 1e-15 && (rhs - full).abs() < 1e-15);
        let n3: u64 = t.trigrams().map(|(_, n)| n).sum();
        let tail = t.trigrams().filter(|((_, _, z), _)| *z == c).map(|(_, n)| n).sum::<u64>() as f64 / n3 as f64;
        assert!((bm.enumerate(a, b, c, 1.0).unwrap() - tail).abs() < 1e-15);
        assert!((bm.mixture(a, b, c, 1.0).unwrap() - tail).abs() < 1e-15);
        assert!(matches!(bm.enumerate(Vocabulary::UNK, a, a, 0.5), Err(Error::UnseenContext(..))));
    }

    #[test]
    fn blank_mixture_needs_trigrams() {
        let (_, _, t) = setup("a b c", 2);
        assert!(BlankMixture::new(&t).is_err());
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let (_, s, t) = setup("a b a b c a c c b a", 2);
        let events = crate::smoothing::bigram_events(&[s], CorpusMode::Continuous);
        let unigram = SmoothedModel::new(&t, Estimator::Interpolated { lambda: 0.0 }).unwrap();
        let r = kl_report(&unigram, &t, KlReference::Unigram, &events).unwrap();
        assert_eq!(r.mean_kl, Some(0.0));
        let uni = crate::smoothing::UniformModel { vocab_size: t.vocab_size() };
        assert_eq!(kl_report(&uni, &t, KlReference::Uniform, &events).unwrap().mean_kl, Some(0.0));
    }

    #[test]
    fn kl_counts_infinite_positions() {
        let (_, s, t) = setup("a b a b c a c c b a", 2);
        let events = crate::smoothing::bigram_events(&[s], CorpusMode::Continuous);
        let uniform = crate::smoothing::UniformModel { vocab_size: t.vocab_size() };
        // uniform puts mass on reserved ids the unigram distribution lacks
        let r = kl_report(&uniform, &t, KlReference::Unigram, &events).unwrap();
        assert_eq!(r.infinite_positions, events.len());
        assert_eq!(r.mean_kl, None);
    }

    #[test]
    fn floored_model_is_normalized() {
        let (_, _, t) = setup("a b a b c a c c b a", 2);
        let mle = SmoothedModel::new(&t, Estimator::Mle).unwrap();
        let f = FlooredModel::new(mle, &t, 1e-3);
        for a in t.observed_types() {
            assert!((f.distribution(a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unseen_report_cases() {
        let (v, s, t) = setup("a b a b c a c c b a", 3);
        let mle = SmoothedModel::new(&t, Estimator::Mle).unwrap();
        let models: Vec<(&str, &dyn BigramModel)> = vec![("mle", &mle)];
        let r = unseen_ngram_report(&t, &s, &models).unwrap();
        assert!(r.unseen_bigrams.positions.is_empty());
        assert!(r.unseen_trigrams.as_ref().unwrap().positions.is_empty());

        let heldout = v.encode("a a b c b".split(' '));
        let r = unseen_ngram_report(&t, &heldout, &models).unwrap();
        // only (a, a) is new
        assert_eq!(r.unseen_bigrams.positions, vec![1]);
        assert_eq!(r.unseen_bigrams.models[0].perplexity, None);
    }
}
