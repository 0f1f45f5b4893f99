//! Count-based bigram estimators and perplexity evaluation.
//!
//! Every estimator is normalized per context: for a context `a` the
//! denominators use Σ_b c(a, b), which equals c(a) everywhere except where
//! `a` ends a sequence. Contexts never followed by anything fall back to the
//! estimator's lower-order distribution.

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusMode, TokenId, TokenSequence, Vocabulary};
use crate::counts::CountTable;
use crate::error::{Error, Result};

pub const DEFAULT_DISCOUNT: f64 = 0.75;

/// Anything that assigns p(x2 | x1) over a dense vocabulary.
pub trait BigramModel {
    fn prob(&self, x1: TokenId, x2: TokenId) -> f64;

    fn vocab_size(&self) -> usize;

    /// Full conditional distribution for context `x1`.
    fn distribution(&self, x1: TokenId) -> Vec<f64> {
        (0..self.vocab_size() as TokenId).map(|x2| self.prob(x1, x2)).collect()
    }
}

impl<M: BigramModel + ?Sized> BigramModel for &M {
    fn prob(&self, x1: TokenId, x2: TokenId) -> f64 {
        (**self).prob(x1, x2)
    }

    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn distribution(&self, x1: TokenId) -> Vec<f64> {
        (**self).distribution(x1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Mle,
    Interpolated { lambda: f64 },
    AbsoluteDiscount { discount: f64 },
    KneserNey { discount: f64 },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Interpolated { .. } => "interpolated",
            Estimator::AbsoluteDiscount { .. } => "absolute_discount",
            Estimator::KneserNey { .. } => "kneser_ney",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Estimator::Mle => Ok(()),
            Estimator::Interpolated { lambda } if (0.0..=1.0).contains(&lambda) => Ok(()),
            Estimator::Interpolated { lambda } => {
                Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")))
            }
            Estimator::AbsoluteDiscount { discount } | Estimator::KneserNey { discount }
                if (0.0..1.0).contains(&discount) =>
            {
                Ok(())
            }
            Estimator::AbsoluteDiscount { discount } | Estimator::KneserNey { discount } => {
                Err(Error::InvalidParameter(format!("discount must lie in [0, 1), got {discount}")))
            }
        }
    }
}

/// A bigram estimator over a count table.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedModel<'a> {
    estimator: Estimator,
    table: &'a CountTable,
}

impl<'a> SmoothedModel<'a> {
    pub fn new(table: &'a CountTable, estimator: Estimator) -> Result<Self> {
        estimator.validate()?;
        if table.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(SmoothedModel { estimator, table })
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn table(&self) -> &'a CountTable {
        self.table
    }

    fn unigram(&self, x: TokenId) -> f64 {
        self.table.unigram(x) as f64 / self.table.total_tokens() as f64
    }

    fn continuation(&self, x: TokenId) -> f64 {
        match self.table.bigram_types() {
            0 => self.unigram(x),
            types => self.table.left_cont(x) as f64 / types as f64,
        }
    }

    /// The distribution mass is backed off to.
    pub fn lower_order(&self, x: TokenId) -> f64 {
        match self.estimator {
            Estimator::KneserNey { .. } => self.continuation(x),
            _ => self.unigram(x),
        }
    }
}

impl BigramModel for SmoothedModel<'_> {
    fn prob(&self, x1: TokenId, x2: TokenId) -> f64 {
        let context = self.table.context_total(x1);
        if context == 0 {
            return self.lower_order(x2);
        }
        let context = context as f64;
        let pair = self.table.bigram(x1, x2) as f64;
        match self.estimator {
            Estimator::Mle => pair / context,
            Estimator::Interpolated { lambda } => lambda * (pair / context) + (1.0 - lambda) * self.unigram(x2),
            Estimator::AbsoluteDiscount { discount } | Estimator::KneserNey { discount } => {
                let backoff = discount * self.table.right_cont(x1) as f64 / context;
                (pair - discount).max(0.0) / context + backoff * self.lower_order(x2)
            }
        }
    }

    fn vocab_size(&self) -> usize {
        self.table.vocab_size()
    }
}

/// p(x2 | x1) = 1 / |V|.
#[derive(Debug, Clone, Copy)]
pub struct UniformModel {
    pub vocab_size: usize,
}

impl BigramModel for UniformModel {
    fn prob(&self, _: TokenId, _: TokenId) -> f64 {
        1.0 / self.vocab_size as f64
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// p(x2 | x1) = c(x2) / T, ignoring the context.
#[derive(Debug, Clone, Copy)]
pub struct UnigramModel<'a> {
    pub table: &'a CountTable,
}

impl BigramModel for UnigramModel<'_> {
    fn prob(&self, _: TokenId, x2: TokenId) -> f64 {
        self.table.unigram(x2) as f64 / self.table.total_tokens() as f64
    }

    fn vocab_size(&self) -> usize {
        self.table.vocab_size()
    }
}

/// Scored (context, target) events of held-out data. Continuous mode scores
/// positions 2..T of the concatenated stream; per-line mode prefixes each
/// line with the boundary token and scores every real token.
pub fn bigram_events(seqs: &[TokenSequence], mode: CorpusMode) -> Vec<(TokenId, TokenId)> {
    match mode {
        CorpusMode::Continuous => {
            let stream = TokenSequence::concat(seqs);
            stream.windows(2).map(|w| (w[0], w[1])).collect()
        }
        CorpusMode::PerLine => seqs
            .iter()
            .flat_map(|s| std::iter::once(Vocabulary::BOUNDARY).chain(s.iter().copied()).zip(s.iter().copied()))
            .collect(),
    }
}

/// Perplexity over a set of scored events.
#[derive(Debug, Clone, PartialEq)]
pub enum Perplexity {
    Finite(f64),
    /// At least one event had probability zero; indices are into the event list.
    Infinite {
        zero_positions: Vec<usize>,
    },
}

impl Perplexity {
    pub fn value(&self) -> f64 {
        match self {
            Perplexity::Finite(v) => *v,
            Perplexity::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Perplexity::Finite(_))
    }
}

/// exp of the mean negative log probability over `events`.
pub fn perplexity_of_events<M: BigramModel>(model: &M, events: &[(TokenId, TokenId)]) -> Result<Perplexity> {
    if events.is_empty() {
        return Err(Error::HeldoutTooShort(events.len()));
    }
    let mut nll = 0.0;
    let mut zeros = Vec::new();
    for (i, &(a, b)) in events.iter().enumerate() {
        let p = model.prob(a, b);
        if p > 0.0 {
            nll -= p.ln();
        } else {
            zeros.push(i);
        }
    }
    if zeros.is_empty() {
        Ok(Perplexity::Finite((nll / events.len() as f64).exp()))
    } else {
        Ok(Perplexity::Infinite { zero_positions: zeros })
    }
}

/// Perplexity of a continuous held-out stream over positions 2..T.
///
/// For infinite results the recorded positions index the predicted token in
/// `heldout` (so the first scored position is 1).
pub fn perplexity<M: BigramModel>(model: &M, heldout: &TokenSequence) -> Result<Perplexity> {
    if heldout.len() < 2 {
        return Err(Error::HeldoutTooShort(heldout.len()));
    }
    let events = bigram_events(std::slice::from_ref(heldout), CorpusMode::Continuous);
    Ok(match perplexity_of_events(model, &events)? {
        Perplexity::Infinite { zero_positions } => {
            Perplexity::Infinite { zero_positions: zero_positions.into_iter().map(|i| i + 1).collect() }
        }
        finite => finite,
    })
}

/// Serializable perplexity record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityReport {
    pub kind: String,
    pub params: Estimator,
    pub heldout_tokens: usize,
    pub scored_positions: usize,
    /// `None` when some position had zero probability.
    pub perplexity: Option<f64>,
    pub zero_prob_positions: Vec<usize>,
}

impl PerplexityReport {
    pub fn new(estimator: Estimator, heldout_tokens: usize, scored_positions: usize, ppl: &Perplexity) -> Self {
        let (perplexity, zero_prob_positions) = match ppl {
            Perplexity::Finite(v) => (Some(*v), Vec::new()),
            Perplexity::Infinite { zero_positions } => (None, zero_positions.clone()),
        };
        PerplexityReport {
            kind: estimator.name().to_string(),
            params: estimator,
            heldout_tokens,
            scored_positions,
            perplexity,
            zero_prob_positions,
        }
    }
}

/// Grid value of λ minimizing held-out perplexity of the interpolated
/// estimator. Infinite perplexities are never selected; ties go to the
/// larger λ.
pub fn fit_lambda(table: &CountTable, events: &[(TokenId, TokenId)], grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let model = SmoothedModel::new(table, Estimator::Interpolated { lambda })?;
        let ppl = perplexity_of_events(&model, events)?.value();
        if !ppl.is_finite() {
            continue;
        }
        best = match best {
            Some((bl, bp)) if bp < ppl || (bp == ppl && bl > lambda) => Some((bl, bp)),
            _ => Some((lambda, ppl)),
        };
    }
    best.map(|(l, _)| l)
        .ok_or_else(|| Error::InvalidParameter("every lambda in the grid gives infinite perplexity".into()))
}
