//! Monte-Carlo and larger-corpus checks. Tolerances are a few standard
//! deviations of the relevant sampling distribution; seeds are fixed.

use ngnoise_core::corpus::CorpusMode;
use ngnoise_core::noising::{sequence_stream, PairNoiser};
use ngnoise_core::smoothing::{bigram_events, fit_lambda, perplexity, perplexity_of_events};
use ngnoise_core::synth::ZipfCorpus;
use ngnoise_core::verify::equivalence_report;
use ngnoise_core::{
    BigramModel, CountTable, Estimator, Noiser, NoisingConfig, PairSides, Scheme, SmoothedModel, TokenId,
    TokenSequence, Vocabulary,
};

fn corpus(n: usize, vocab_size: usize, seed: u64) -> (Vocabulary, TokenSequence, CountTable) {
    let toks = ZipfCorpus::new(vocab_size).tokens(n, seed).unwrap();
    let vocab = Vocabulary::build(&toks, 0).unwrap();
    let seq = vocab.encode(&toks);
    let table = CountTable::build(&vocab, std::slice::from_ref(&seq), 2, CorpusMode::Continuous).unwrap();
    (vocab, seq, table)
}

#[test]
fn unigram_swap_fraction_is_binomial() {
    let (_, seq, t) = corpus(100_001, 1000, 1);
    let noiser = Noiser::new(&t, NoisingConfig::new(Scheme::Unigram, 0.25, 42).unwrap()).unwrap();
    for stream in 0..3 {
        let b = noiser.noise_lm(&seq, stream);
        let n = b.swap_mask.len() as f64;
        let sd = (n * 0.25 * 0.75).sqrt();
        assert!((b.swaps() as f64 - 0.25 * n).abs() <= 3.0 * sd, "stream {stream}: {}", b.swaps());
    }
}

#[test]
fn replaced_tokens_follow_the_proposal() {
    let (vocab, seq, t) = corpus(50_001, 50, 2);
    let noiser = Noiser::new(&t, NoisingConfig::new(Scheme::Unigram, 1.0, 5).unwrap()).unwrap();
    let b = noiser.noise_lm(&seq, 0);
    let n = b.x_tilde.len() as f64;
    let mut hist = vec![0.0; vocab.len()];
    for &x in b.x_tilde.iter() {
        hist[x as usize] += 1.0;
    }
    // Pearson chi-square against q over the types with expected count >= 5.
    let (mut chi2, mut dof) = (0.0, 0usize);
    for (x, &obs) in hist.iter().enumerate() {
        let exp = n * noiser.proposal().prob(x as TokenId);
        if exp >= 5.0 {
            chi2 += (obs - exp).powi(2) / exp;
            dof += 1;
        } else if exp == 0.0 {
            assert_eq!(obs, 0.0);
        }
    }
    let dof = (dof - 1) as f64;
    assert!(chi2 < dof + 5.0 * (2.0 * dof).sqrt(), "chi2 {chi2} with {dof} dof");
}

#[test]
fn pair_sides_track_their_mean_adaptive_gamma() {
    let gen = ZipfCorpus::new(800);
    let src_lines = gen.lines(100_000, 20, 3).unwrap();
    let tgt_lines = ZipfCorpus { exponent: 0.8, ..ZipfCorpus::new(600) }.lines(100_000, 20, 4).unwrap();
    let side = |lines: &[Vec<String>]| {
        let vocab = Vocabulary::build(lines.iter().flatten(), 0).unwrap();
        let seqs: Vec<TokenSequence> = lines.iter().map(|l| vocab.encode(l)).collect();
        let table = CountTable::build(&vocab, &seqs, 2, CorpusMode::PerLine).unwrap();
        (seqs, table)
    };
    let (src, src_t) = side(&src_lines);
    let (tgt, tgt_t) = side(&tgt_lines);
    let pair = PairNoiser::new(&src_t, &tgt_t, NoisingConfig::new(Scheme::AbsoluteDiscount, 0.3, 8).unwrap()).unwrap();

    let mut swaps = [0usize; 2];
    let mut mean = [0.0f64; 2];
    let mut var = [0.0f64; 2];
    for (i, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let (bs, bt) = pair.noise_parallel_pair(s, t, sequence_stream(0, i as u64), PairSides::Both);
        for (k, (seq, batch, noiser)) in [(s, bs, pair.source()), (t, bt, pair.target())].into_iter().enumerate() {
            swaps[k] += batch.swaps();
            for &x in seq.iter() {
                let g = noiser.gamma(x);
                mean[k] += g;
                var[k] += g * (1.0 - g);
            }
        }
    }
    for k in 0..2 {
        let z = (swaps[k] as f64 - mean[k]) / var[k].sqrt();
        assert!(z.abs() <= 3.0, "side {k}: {} swaps vs {:.1} expected (z = {z:.2})", swaps[k], mean[k]);
        assert!(mean[k] / 100_000.0 < 0.3);
    }
    assert!((mean[0] - mean[1]).abs() > 100.0, "sides should have distinct mean rates");
}

#[test]
fn five_thousand_token_example_converges() {
    let (_, seq, t) = corpus(5_000, 1000, 7);
    let report = equivalence_report(&seq, &t, 0.25, 2000, 7, 5.0).unwrap();
    assert!(report.compared > 20);
    assert!(report.max_rel_error < 0.02, "{}", report.max_rel_error);
}

#[test]
fn monte_carlo_error_shrinks_as_inverse_square_root() {
    let (_, seq, t) = corpus(5_000, 200, 9);
    let rms = |n: u64| {
        let r = equivalence_report(&seq, &t, 0.25, n, 11, 5.0).unwrap();
        let errs: Vec<f64> = r.per_bigram.iter().filter_map(|c| c.relative_error).collect();
        (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
    };
    let (coarse, fine) = (rms(100), rms(1600));
    // 16x the samples should cut the error by about 4x.
    let ratio = coarse / fine;
    assert!((3.0..5.3).contains(&ratio), "rms {coarse} -> {fine}, ratio {ratio}");
}

#[test]
fn lambda_fit_matches_exhaustive_grid() {
    let toks = ZipfCorpus::new(300).tokens(30_000, 13).unwrap();
    let (train, held) = toks.split_at(27_000);
    let vocab = Vocabulary::build(train, 2).unwrap();
    let train = vocab.encode(train);
    let held = vocab.encode(held);
    let t = CountTable::build(&vocab, std::slice::from_ref(&train), 2, CorpusMode::Continuous).unwrap();
    let events = bigram_events(std::slice::from_ref(&held), CorpusMode::Continuous);
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();

    let mut best = (f64::INFINITY, f64::NAN);
    for &lambda in &grid {
        let model = SmoothedModel::new(&t, Estimator::Interpolated { lambda }).unwrap();
        let nll: f64 = events.iter().map(|&(a, b)| -model.prob(a, b).ln()).sum();
        let ppl = (nll / events.len() as f64).exp();
        if ppl <= best.0 {
            best = (ppl, lambda);
        }
    }
    let fitted = fit_lambda(&t, &events, &grid).unwrap();
    assert_eq!(fitted, best.1);
    assert!(fitted > 0.0 && fitted < 1.0);

    let model = SmoothedModel::new(&t, Estimator::Interpolated { lambda: fitted }).unwrap();
    let direct = perplexity(&model, &held).unwrap().value();
    assert!((direct - best.0).abs() < 1e-9 * best.0);
    assert_eq!(perplexity_of_events(&model, &events).unwrap().value(), direct);
}

#[test]
fn million_token_round_trip() {
    let toks = ZipfCorpus::new(50_000).tokens(1_000_000, 17).unwrap();
    let vocab = Vocabulary::build(&toks, 1).unwrap();
    let seq = vocab.encode(&toks);
    let decoded = vocab.decode(&seq);
    assert_eq!(decoded.len(), toks.len());
    let mut oov = 0;
    for (orig, dec) in toks.iter().zip(decoded) {
        if vocab.id(orig) == Vocabulary::UNK {
            oov += 1;
            assert_eq!(dec, "<unk>");
        } else {
            assert_eq!(dec, orig);
        }
    }
    assert!(oov > 0);
}
