use std::collections::{BTreeMap, BTreeSet};

use ngnoise_core::corpus::{encode_lines, CorpusMode};
use ngnoise_core::noising::gamma_for;
use ngnoise_core::verify::{analytic_pseudocounts, mixture_weights};
use ngnoise_core::{
    BigramModel, CountTable, Estimator, Noiser, NoisingConfig, Scheme, SmoothedModel, TokenId, TokenSequence,
    Vocabulary,
};
use proptest::prelude::*;

fn lines_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec((0u8..8).prop_map(|t| format!("t{t}")), 0..12), 1..20)
        .prop_filter("needs a token", |ls| ls.iter().any(|l| !l.is_empty()))
}

fn mode_strategy() -> impl Strategy<Value = CorpusMode> {
    prop_oneof![Just(CorpusMode::Continuous), Just(CorpusMode::PerLine)]
}

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

fn build(lines: &[Vec<String>], mode: CorpusMode, order: usize) -> (Vocabulary, Vec<TokenSequence>, CountTable) {
    let vocab = Vocabulary::build(lines.iter().flatten(), 0).unwrap();
    let seqs = encode_lines(&vocab, lines, mode);
    let table = CountTable::build(&vocab, &seqs, order, mode).unwrap();
    (vocab, seqs, table)
}

/// Every (context, next) pair the table should have counted, by direct enumeration.
fn brute_bigrams(seqs: &[TokenSequence], mode: CorpusMode) -> BTreeMap<(TokenId, TokenId), u64> {
    let streams: Vec<Vec<TokenId>> = match mode {
        CorpusMode::Continuous => vec![TokenSequence::concat(seqs).to_vec()],
        CorpusMode::PerLine => seqs
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| std::iter::once(Vocabulary::BOUNDARY).chain(s.iter().copied()).collect())
            .collect(),
    };
    let mut out = BTreeMap::new();
    for s in &streams {
        for w in s.windows(2) {
            *out.entry((w[0], w[1])).or_default() += 1;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counts_agree_with_enumeration(lines in lines_strategy(), mode in mode_strategy()) {
        let (vocab, seqs, t) = build(&lines, mode, 3);
        let expected = brute_bigrams(&seqs, mode);
        let got: BTreeMap<_, _> = t.bigrams().collect();
        prop_assert_eq!(&got, &expected);

        let unigram_total: u64 = t.unigram_counts().iter().sum();
        prop_assert_eq!(unigram_total, t.total_tokens());
        prop_assert_eq!(t.right_conts().iter().sum::<u64>(), t.bigram_types());
        prop_assert_eq!(t.left_conts().iter().sum::<u64>(), t.bigram_types());
        prop_assert_eq!(t.bigram_types() as usize, expected.len());
        for a in 0..vocab.len() as TokenId {
            let succ: BTreeSet<TokenId> = expected.keys().filter(|k| k.0 == a).map(|k| k.1).collect();
            let pred: BTreeSet<TokenId> = expected.keys().filter(|k| k.1 == a).map(|k| k.0).collect();
            prop_assert_eq!(t.right_cont(a) as usize, succ.len());
            prop_assert_eq!(t.left_cont(a) as usize, pred.len());
            let row: u64 = expected.iter().filter(|(k, _)| k.0 == a).map(|(_, c)| c).sum();
            prop_assert_eq!(t.context_total(a), row);
            prop_assert!(t.right_cont(a) <= t.context_total(a));
        }
        if mode == CorpusMode::Continuous {
            let stream = TokenSequence::concat(&seqs);
            let last = *stream.last().unwrap();
            for a in 0..vocab.len() as TokenId {
                prop_assert_eq!(t.context_total(a) + u64::from(a == last), t.unigram(a));
            }
        }
    }

    #[test]
    fn sharding_never_changes_counts(lines in lines_strategy(), mode in mode_strategy(), shards in 1usize..9) {
        let (vocab, seqs, t) = build(&lines, mode, 3);
        let sharded = CountTable::build_sharded(&vocab, &seqs, 3, mode, shards).unwrap();
        prop_assert_eq!(sharded, t);
    }

    #[test]
    fn per_line_merge_is_a_commutative_split(lines in lines_strategy(), cut in 0usize..20) {
        let (vocab, seqs, whole) = build(&lines, CorpusMode::PerLine, 3);
        let cut = cut.min(seqs.len());
        let part = |s: &[TokenSequence]| {
            if s.iter().all(|l| l.is_empty()) {
                CountTable::empty(&vocab, 3, CorpusMode::PerLine).unwrap()
            } else {
                CountTable::build(&vocab, s, 3, CorpusMode::PerLine).unwrap()
            }
        };
        let (a, b) = (part(&seqs[..cut]), part(&seqs[cut..]));
        let ab = a.merge(&b).unwrap();
        prop_assert_eq!(&ab, &b.merge(&a).unwrap());
        prop_assert_eq!(&ab, &whole);
    }

    #[test]
    fn tsv_round_trips(lines in lines_strategy(), mode in mode_strategy()) {
        let (_, _, t) = build(&lines, mode, 3);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        prop_assert_eq!(CountTable::read_tsv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn encoding_preserves_length_and_skips_reserved_ids(
        train in prop::collection::vec(0u8..10, 1..60),
        text in prop::collection::vec(0u8..14, 0..60),
        min_count in 0u64..3,
    ) {
        let train: Vec<String> = train.iter().map(|t| format!("w{t}")).collect();
        let text: Vec<String> = text.iter().map(|t| format!("w{t}")).collect();
        let vocab = Vocabulary::build(&train, min_count).unwrap();
        let seq = vocab.encode(&text);
        prop_assert_eq!(seq.len(), text.len());
        prop_assert!(seq.iter().all(|&id| id != Vocabulary::BLANK && id != Vocabulary::BOUNDARY));
        for (surface, decoded) in text.iter().zip(vocab.decode(&seq)) {
            let known = vocab.tokens().contains(surface);
            prop_assert_eq!(decoded, if known { surface.as_str() } else { "<unk>" });
        }
    }

    #[test]
    fn adaptive_gamma_never_exceeds_gamma0(lines in lines_strategy(), gamma0 in 0.0f64..=1.0) {
        let (vocab, _, t) = build(&lines, CorpusMode::Continuous, 2);
        for scheme in [Scheme::AbsoluteDiscount, Scheme::BigramKn] {
            let cfg = NoisingConfig::new(scheme, gamma0, 0).unwrap();
            for x in 0..vocab.len() as TokenId {
                let g = gamma_for(&t, &cfg, x);
                prop_assert!((0.0..=gamma0).contains(&g), "{} > {}", g, gamma0);
            }
        }
    }

    #[test]
    fn estimators_normalize(
        lines in lines_strategy(),
        mode in mode_strategy(),
        lambda in 0.0f64..=1.0,
        discount in 0.01f64..=1.0,
    ) {
        let (vocab, _, t) = build(&lines, mode, 2);
        for est in [
            Estimator::Mle,
            Estimator::Interpolated { lambda },
            Estimator::AbsoluteDiscount { discount },
            Estimator::KneserNey { discount },
        ] {
            let m = SmoothedModel::new(&t, est).unwrap();
            for a in 0..vocab.len() as TokenId {
                if t.context_total(a) > 0 {
                    let sum: f64 = m.distribution(a).iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-9, "{:?} context {}: {}", est, a, sum);
                }
            }
        }
    }

    #[test]
    fn larger_discount_moves_mass_to_backoff(lines in lines_strategy(), d1 in 0.05f64..0.5, bump in 0.05f64..0.5) {
        let (vocab, _, t) = build(&lines, CorpusMode::Continuous, 2);
        let d2 = d1 + bump;
        let (m1, m2) = (
            SmoothedModel::new(&t, Estimator::AbsoluteDiscount { discount: d1 }).unwrap(),
            SmoothedModel::new(&t, Estimator::AbsoluteDiscount { discount: d2 }).unwrap(),
        );
        for a in 0..vocab.len() as TokenId {
            if t.context_total(a) == 0 {
                continue;
            }
            for b in 0..vocab.len() as TokenId {
                if t.bigram(a, b) == 0 && t.unigram(b) > 0 {
                    prop_assert!(m2.prob(a, b) > m1.prob(a, b));
                }
            }
        }
    }

    #[test]
    fn noising_replays_and_only_touches_gated_positions(
        lines in lines_strategy(),
        scheme in scheme_strategy(),
        gamma0 in 0.0f64..=1.0,
        seed in any::<u64>(),
        stream in any::<u64>(),
    ) {
        let (_, seqs, t) = build(&lines, CorpusMode::Continuous, 2);
        let seq = &seqs[0];
        let cfg = NoisingConfig::new(scheme, gamma0, seed).unwrap();
        let noiser = match Noiser::new(&t, cfg) {
            Ok(n) => n,
            // A continuation proposal needs at least one bigram.
            Err(_) => {
                prop_assert!(scheme == Scheme::BigramKn && t.bigram_types() == 0);
                return Ok(());
            }
        };
        let batch = noiser.noise_lm(seq, stream);
        prop_assert_eq!(&batch, &Noiser::new(&t, cfg).unwrap().noise_lm(seq, stream));
        let n = seq.len().saturating_sub(1);
        prop_assert_eq!(batch.swap_mask.len(), n);
        for j in 0..n {
            if batch.swap_mask[j] {
                prop_assert!(noiser.proposal().prob(batch.x_tilde[j]) > 0.0);
            } else {
                prop_assert_eq!(batch.x_tilde[j], seq[j]);
                prop_assert_eq!(batch.y_tilde[j], seq[j + 1]);
            }
            if !scheme.noises_target() {
                prop_assert_eq!(batch.y_tilde[j], seq[j + 1]);
            }
        }
    }

    #[test]
    fn analytic_rows_match_their_totals(lines in lines_strategy(), gamma in 0.0f64..=1.0) {
        let (vocab, _, t) = build(&lines, CorpusMode::Continuous, 2);
        let analytic = analytic_pseudocounts(&t, gamma).unwrap();
        for a in 0..vocab.len() as TokenId {
            let row: f64 = (0..vocab.len() as TokenId).map(|b| analytic.get(a, b)).sum();
            prop_assert!((row - analytic.row_total(a)).abs() < 1e-9);
            if row > 0.0 {
                let norm: f64 = (0..vocab.len() as TokenId).map(|b| analytic.normalized(a, b)).sum();
                prop_assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixture_weights_sum_to_one(len in 1usize..=20, gamma in 0.0f64..=1.0) {
        let w = mixture_weights(len, gamma).unwrap();
        prop_assert!((w.total() - 1.0).abs() < 1e-12);
        let kept_all = w.weight((1 << len) - 1);
        prop_assert!((kept_all - (1.0 - gamma).powi(len as i32)).abs() < 1e-15);
    }
}
