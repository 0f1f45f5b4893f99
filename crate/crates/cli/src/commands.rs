use std::fs;

use anyhow::{bail, Context, Result};
use ngnoise_core::corpus::CorpusMode;
use ngnoise_core::hash::content_hash;
use ngnoise_core::noising::{sequence_stream, PairNoiser};
use ngnoise_core::smoothing::{bigram_events, fit_lambda, perplexity_of_events, PerplexityReport};
use ngnoise_core::verify::{
    empirical_pseudocounts, equivalence_report, kl_report as kl, unseen_ngram_report, FlooredModel, KlReference,
    KlReport, NoisedEmpiricalModel, KL_FLOOR_EPSILON,
};
use ngnoise_core::{
    BigramModel, CountTable, Estimator, NoisedBatch, Noiser, NoisingConfig, PairSides, ProposalKind, Scheme,
    SmoothedModel, TokenSequence, Vocabulary,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::{emit, json_document, sidecar, usage, write_file, Corpus, Input, RunMeta};
use crate::{
    estimator, BuildVocabArgs, CountArgs, EstimatorKind, EvalArgs, HeldoutArgs, KlArgs, NoiseArgs, ReferenceArg,
    ReportFormat, UnseenArgs, VerifyArgs,
};

pub fn build_vocab(args: &BuildVocabArgs) -> Result<()> {
    let corpus = Input::load("corpus", &args.corpus)?;
    let lines = corpus.lines()?;
    let vocab = Vocabulary::build(lines.iter().flatten(), args.min_count).context("building vocabulary")?;
    let mut out = Vec::new();
    vocab.write_to(&mut out)?;
    write_file(&args.out, &out)?;

    let meta = RunMeta::new("build-vocab", json!({ "min_count": args.min_count }), &[&corpus]);
    let summary = json!({ "vocab_size": vocab.len(), "sha256": content_hash(&out) });
    write_file(&sidecar(&args.out), &json_document(&meta, &summary))
}

pub fn count(args: &CountArgs) -> Result<()> {
    let corpus_in = Input::load("corpus", &args.corpus)?;
    let vocab_in = Input::load("vocab", &args.vocab)?;
    let vocab = vocab_in.vocabulary()?;
    let mode = args.mode.into();
    let corpus = Corpus::encode(&corpus_in, &vocab, mode)?;
    let order = args.max_order as usize;
    let table = if args.shards > 1 {
        CountTable::build_sharded(&vocab, &corpus.seqs, order, mode, args.shards)
    } else {
        CountTable::build(&vocab, &corpus.seqs, order, mode)
    }
    .context("counting")?;

    // The shard count is an execution detail and deliberately left out, so
    // sharded and unsharded runs produce identical files.
    let meta = RunMeta::new("count", json!({ "max_order": order, "mode": mode }), &[&corpus_in, &vocab_in]);
    let mut out = Vec::new();
    table.write_tsv_with_meta(&mut out, &[("run", meta.to_compact())])?;
    write_file(&args.out, &out)
}

fn load_counts(counts: &Input, vocab: &Vocabulary) -> Result<CountTable> {
    let table = counts.counts()?;
    table.check_vocab(vocab).with_context(|| format!("{} does not match the vocabulary", counts.record.name))?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// noise

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RunMode {
    Continuous,
    PerLine,
    ParallelPair,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseConfigFile {
    scheme: Scheme,
    gamma0: f64,
    seed: u64,
    mode: RunMode,
    #[serde(default)]
    proposal: Option<ProposalKind>,
    #[serde(default)]
    noise_target: Option<bool>,
    #[serde(default)]
    sides: Option<PairSides>,
}

impl NoiseConfigFile {
    fn resolve(&self) -> Result<NoisingConfig> {
        let cfg = NoisingConfig::from_parts(
            self.scheme,
            self.gamma0,
            self.noise_target.unwrap_or(self.scheme.noises_target()),
            self.seed,
            self.proposal.unwrap_or(self.scheme.proposal()),
        )?;
        if self.sides.is_some() && self.mode != RunMode::ParallelPair {
            bail!(usage("\"sides\" applies only to parallel-pair mode"));
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct FileRecord {
    name: String,
    sha256: String,
}

#[derive(Serialize, Default)]
struct SideStats {
    side: &'static str,
    positions: usize,
    swaps: usize,
    swap_fraction: f64,
    /// Mean noising probability over the eligible positions.
    expected_swap_fraction: f64,
}

impl SideStats {
    fn add(
        &mut self,
        noiser: &Noiser<'_>,
        contexts: &[ngnoise_core::TokenId],
        batch: &NoisedBatch,
        gamma_sum: &mut f64,
    ) {
        self.positions += batch.swap_mask.len();
        self.swaps += batch.swaps();
        *gamma_sum += contexts.iter().map(|&x| noiser.gamma(x)).sum::<f64>();
    }

    fn finish(mut self, gamma_sum: f64) -> Self {
        if self.positions > 0 {
            self.swap_fraction = self.swaps as f64 / self.positions as f64;
            self.expected_swap_fraction = gamma_sum / self.positions as f64;
        }
        self
    }
}

#[derive(Serialize)]
struct EpochRecord {
    epoch: u32,
    files: Vec<FileRecord>,
    stats: Vec<SideStats>,
}

/// Lay `tokens` out with the given line lengths, one space between tokens.
fn render(line_lens: impl Iterator<Item = usize>, tokens: &[&str]) -> Vec<u8> {
    let mut out = String::new();
    let mut k = 0;
    for len in line_lens {
        out.push_str(&tokens[k..k + len].join(" "));
        out.push('\n');
        k += len;
    }
    out.into_bytes()
}

/// Original surface tokens with swapped input positions replaced; position
/// `j + shift` of the output corresponds to position `j` of the batch.
fn overlay<'a>(
    original: &[&'a str],
    batch_tokens: &TokenSequence,
    mask: &[bool],
    shift: usize,
    vocab: &'a Vocabulary,
) -> Vec<&'a str> {
    let mut out = original.to_vec();
    for (j, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        out[j + shift] = vocab.surface(batch_tokens[j]);
    }
    out
}

struct EpochOutput {
    files: Vec<(String, Vec<u8>)>,
    stats: Vec<SideStats>,
}

fn noise_monolingual(
    noiser: &Noiser<'_>,
    vocab: &Vocabulary,
    corpus: &Corpus,
    mode: CorpusMode,
    epoch: u32,
) -> EpochOutput {
    let flat: Vec<&str> = corpus.lines.iter().flatten().map(String::as_str).collect();
    // (offset into `flat`, sequence, noised batch)
    let segments: Vec<(usize, TokenSequence, NoisedBatch)> = match mode {
        CorpusMode::Continuous => {
            let seq = corpus.stream();
            let batch = noiser.noise_lm(&seq, sequence_stream(epoch as u64, 0));
            vec![(0, seq, batch)]
        }
        CorpusMode::PerLine => {
            let mut offset = 0;
            noiser
                .noise_batch(&corpus.seqs, epoch as u64)
                .into_iter()
                .zip(&corpus.seqs)
                .map(|(batch, seq)| {
                    offset += seq.len();
                    (offset - seq.len(), seq.clone(), batch)
                })
                .collect()
        }
    };

    let noise_target = noiser.config().noise_target();
    let mut inputs = Vec::with_capacity(flat.len());
    let mut targets = Vec::new();
    let mut stats = SideStats { side: "input", ..Default::default() };
    let mut gamma_sum = 0.0;
    for (offset, seq, batch) in &segments {
        let original = &flat[*offset..*offset + seq.len()];
        stats.add(noiser, &seq[..batch.swap_mask.len()], batch, &mut gamma_sum);
        inputs.extend(overlay(original, &batch.x_tilde, &batch.swap_mask, 0, vocab));
        if noise_target {
            targets.extend(overlay(original, &batch.y_tilde, &batch.swap_mask, 1, vocab));
        }
    }

    let lens = || corpus.lines.iter().map(Vec::len);
    let mut files = vec![(format!("epoch-{epoch}.txt"), render(lens(), &inputs))];
    if noise_target {
        files.push((format!("epoch-{epoch}.targets.txt"), render(lens(), &targets)));
    }
    EpochOutput { files, stats: vec![stats.finish(gamma_sum)] }
}

struct Side<'a> {
    vocab: &'a Vocabulary,
    corpus: &'a Corpus,
}

fn noise_pair(pair: &PairNoiser<'_>, src: &Side<'_>, tgt: &Side<'_>, sides: PairSides, epoch: u32) -> EpochOutput {
    let active = [
        matches!(sides, PairSides::Both | PairSides::SourceOnly),
        matches!(sides, PairSides::Both | PairSides::TargetOnly),
    ];
    let mut tokens: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    let mut stats =
        [SideStats { side: "source", ..Default::default() }, SideStats { side: "target", ..Default::default() }];
    let mut gamma_sums = [0.0; 2];
    for (i, (s, t)) in src.corpus.seqs.iter().zip(&tgt.corpus.seqs).enumerate() {
        let (bs, bt) = pair.noise_parallel_pair(s, t, sequence_stream(epoch as u64, i as u64), sides);
        let parts = [(src, s, bs, pair.source()), (tgt, t, bt, pair.target())];
        for (k, (side, seq, batch, noiser)) in parts.into_iter().enumerate() {
            let original: Vec<&str> = side.corpus.lines[i].iter().map(String::as_str).collect();
            if active[k] {
                stats[k].add(noiser, seq, &batch, &mut gamma_sums[k]);
            }
            tokens[k].extend(overlay(&original, &batch.x_tilde, &batch.swap_mask, 0, side.vocab));
        }
    }
    let render_side = |side: &Side<'_>, toks: &[&str]| render(side.corpus.lines.iter().map(Vec::len), toks);
    EpochOutput {
        files: vec![
            (format!("epoch-{epoch}.src.txt"), render_side(src, &tokens[0])),
            (format!("epoch-{epoch}.tgt.txt"), render_side(tgt, &tokens[1])),
        ],
        stats: stats
            .into_iter()
            .zip(gamma_sums)
            .zip(active)
            .filter(|(_, on)| *on)
            .map(|((st, g), _)| st.finish(g))
            .collect(),
    }
}

pub fn noise(args: &NoiseArgs) -> Result<()> {
    let config_in = Input::load("config", &args.config)?;
    let file: NoiseConfigFile = serde_json::from_slice(config_in.bytes())
        .map_err(|e| usage(format!("invalid noising config {}: {e}", config_in.record.name)))?;
    let config = file.resolve()?;
    if args.epochs == 0 {
        bail!(usage("--epochs must be at least 1"));
    }
    let pair_mode = file.mode == RunMode::ParallelPair;
    if pair_mode != args.pair_corpus.is_some() {
        bail!(usage(if pair_mode {
            "parallel-pair mode needs --pair-corpus, --pair-vocab and --pair-counts"
        } else {
            "--pair-corpus is only valid in parallel-pair mode"
        }));
    }

    let corpus_in = Input::load("corpus", &args.corpus)?;
    let vocab_in = Input::load("vocab", &args.vocab)?;
    let counts_in = Input::load("counts", &args.counts)?;
    let vocab = vocab_in.vocabulary()?;
    let table = load_counts(&counts_in, &vocab)?;
    let mut inputs = vec![&config_in, &corpus_in, &vocab_in, &counts_in];

    let sides = file.sides.unwrap_or(PairSides::Both);
    let mut resolved = json!({
        "scheme": config.scheme(),
        "gamma0": config.gamma0(),
        "seed": config.seed(),
        "mode": file.mode,
        "proposal": config.proposal(),
        "noise_target": config.noise_target(),
        "epochs": args.epochs,
    });

    let pair_inputs;
    let epochs: Vec<EpochOutput> = if pair_mode {
        let (pc, pv, pn) = (
            args.pair_corpus.as_deref().expect("checked above"),
            args.pair_vocab.as_deref().expect("required by clap"),
            args.pair_counts.as_deref().expect("required by clap"),
        );
        pair_inputs =
            [Input::load("pair_corpus", pc)?, Input::load("pair_vocab", pv)?, Input::load("pair_counts", pn)?];
        inputs.extend(pair_inputs.iter());
        resolved["sides"] = json!(sides);
        let tgt_vocab = pair_inputs[1].vocabulary()?;
        let tgt_table = load_counts(&pair_inputs[2], &tgt_vocab)?;
        let src_corpus = Corpus::encode(&corpus_in, &vocab, CorpusMode::PerLine)?;
        let tgt_corpus = Corpus::encode(&pair_inputs[0], &tgt_vocab, CorpusMode::PerLine)?;
        if src_corpus.lines.len() != tgt_corpus.lines.len() {
            bail!(
                "parallel corpora differ in length: {} source lines, {} target lines",
                src_corpus.lines.len(),
                tgt_corpus.lines.len()
            );
        }
        let pair = PairNoiser::new(&table, &tgt_table, config)?;
        let (src, tgt) = (Side { vocab: &vocab, corpus: &src_corpus }, Side { vocab: &tgt_vocab, corpus: &tgt_corpus });
        (0..args.epochs).map(|e| noise_pair(&pair, &src, &tgt, sides, e)).collect()
    } else {
        let mode = match file.mode {
            RunMode::Continuous => CorpusMode::Continuous,
            _ => CorpusMode::PerLine,
        };
        if table.mode() != mode {
            bail!(usage(format!("config mode is {mode} but the counts were built in {} mode", table.mode())));
        }
        let corpus = Corpus::encode(&corpus_in, &vocab, mode)?;
        let noiser = Noiser::new(&table, config)?;
        (0..args.epochs).map(|e| noise_monolingual(&noiser, &vocab, &corpus, mode, e)).collect()
    };

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut records = Vec::new();
    for (epoch, out) in (0..).zip(epochs) {
        let mut files = Vec::new();
        for (name, bytes) in out.files {
            write_file(&args.out_dir.join(&name), &bytes)?;
            files.push(FileRecord { sha256: content_hash(&bytes), name });
        }
        records.push(EpochRecord { epoch, files, stats: out.stats });
    }
    let meta = RunMeta::new("noise", resolved, &inputs);
    write_file(&args.out_dir.join("noise-run.json"), &json_document(&meta, &json!({ "epochs": records })))
}

// ---------------------------------------------------------------------------
// verification and evaluation

#[derive(Serialize)]
struct ComparisonRow<'a> {
    x1: &'a str,
    x2: &'a str,
    analytic_count: f64,
    empirical_count: f64,
    relative_error: Option<f64>,
}

pub fn verify_equivalence(args: &VerifyArgs) -> Result<()> {
    let corpus_in = Input::load("corpus", &args.corpus)?;
    let vocab_in = Input::load("vocab", &args.vocab)?;
    let counts_in = Input::load("counts", &args.counts)?;
    let vocab = vocab_in.vocabulary()?;
    let table = load_counts(&counts_in, &vocab)?;
    if table.mode() != CorpusMode::Continuous {
        bail!("pseudocount verification needs continuous-mode counts");
    }
    let seq = Corpus::encode(&corpus_in, &vocab, CorpusMode::Continuous)?.stream();
    if seq.len() as u64 != table.total_tokens() {
        bail!(
            "{} holds {} tokens but {} counts {}; the counts were not built from this corpus",
            corpus_in.record.name,
            seq.len(),
            counts_in.record.name,
            table.total_tokens()
        );
    }
    let report = equivalence_report(&seq, &table, args.gamma, args.n_samples, args.seed, args.floor)?;

    let meta = RunMeta::new(
        "verify-equivalence",
        json!({
            "gamma": args.gamma,
            "n_samples": args.n_samples,
            "seed": args.seed,
            "floor": args.floor,
            "format": args.format.as_str(),
        }),
        &[&corpus_in, &vocab_in, &counts_in],
    );
    let rows: Vec<ComparisonRow<'_>> = report
        .per_bigram
        .iter()
        .map(|c| ComparisonRow {
            x1: vocab.surface(c.x1),
            x2: vocab.surface(c.x2),
            analytic_count: c.analytic_count,
            empirical_count: c.empirical_count,
            relative_error: c.relative_error,
        })
        .collect();
    let summary = json!({
        "gamma": report.gamma,
        "n_samples": report.n_samples,
        "seed": report.seed,
        "floor": report.floor,
        "compared": report.compared,
        "max_rel_error": report.max_rel_error,
        "mean_rel_error": report.mean_rel_error,
    });
    let bytes = match args.format {
        ReportFormat::Json => {
            let mut doc = summary;
            doc["per_bigram"] = serde_json::to_value(&rows)?;
            json_document(&meta, &doc)
        }
        ReportFormat::Tsv => {
            let mut out = String::from("#ngnoise-equivalence\tv1\n");
            out += &format!("#meta\t{}\n", meta.to_compact());
            for (k, v) in summary.as_object().expect("object literal") {
                out += &format!("#{k}\t{v}\n");
            }
            out += "x1\tx2\tanalytic_count\tempirical_count\trelative_error\n";
            for r in &rows {
                let rel = r.relative_error.map_or_else(|| "-".to_string(), |e| e.to_string());
                out += &format!("{}\t{}\t{}\t{}\t{rel}\n", r.x1, r.x2, r.analytic_count, r.empirical_count);
            }
            out.into_bytes()
        }
    };
    emit(args.out.as_deref(), &bytes)
}

struct Heldout {
    inputs: [Input; 3],
    table: CountTable,
    seqs: Vec<TokenSequence>,
    heldout_tokens: usize,
}

impl HeldoutArgs {
    fn load(&self) -> Result<Heldout> {
        let inputs = [
            Input::load("counts", &self.counts)?,
            Input::load("vocab", &self.vocab)?,
            Input::load("heldout", &self.heldout)?,
        ];
        let vocab = inputs[1].vocabulary()?;
        let table = load_counts(&inputs[0], &vocab)?;
        let corpus = Corpus::encode(&inputs[2], &vocab, table.mode())?;
        let heldout_tokens = corpus.seqs.iter().map(|s| s.len()).sum();
        Ok(Heldout { inputs, table, seqs: corpus.seqs, heldout_tokens })
    }
}

impl Heldout {
    fn input_refs(&self) -> Vec<&Input> {
        self.inputs.iter().collect()
    }
}

pub fn eval_perplexity(args: &EvalArgs) -> Result<()> {
    let data = args.data.load()?;
    let events = bigram_events(&data.seqs, data.table.mode());
    let est = match &args.lambda_grid {
        Some(_) if args.est.estimator != EstimatorKind::Interpolated => {
            bail!(usage("--lambda-grid applies only to the interpolated estimator"))
        }
        Some(grid) => {
            estimator(EstimatorKind::Interpolated, fit_lambda(&data.table, &events, grid)?, args.est.discount)
        }
        None => args.est.estimator(),
    };
    let model = SmoothedModel::new(&data.table, est)?;
    let ppl = perplexity_of_events(&model, &events)?;
    let report = PerplexityReport::new(est, data.heldout_tokens, events.len(), &ppl);
    let meta = RunMeta::new(
        "eval-perplexity",
        json!({ "estimator": est, "lambda_grid": args.lambda_grid, "mode": data.table.mode() }),
        &data.input_refs(),
    );
    emit(args.out.as_deref(), &json_document(&meta, &report))
}

#[derive(Serialize)]
struct KlDocument {
    estimator: Estimator,
    floor_epsilon: Option<f64>,
    #[serde(flatten)]
    kl: KlReport,
}

pub fn kl_report(args: &KlArgs) -> Result<()> {
    let data = args.data.load()?;
    let events = bigram_events(&data.seqs, data.table.mode());
    let est = args.est.estimator();
    let model = SmoothedModel::new(&data.table, est)?;
    let reference = match args.reference {
        ReferenceArg::Uniform => KlReference::Uniform,
        ReferenceArg::Unigram => KlReference::Unigram,
    };
    let floor = args.floor_epsilon.or((est == Estimator::Mle).then_some(KL_FLOOR_EPSILON));
    let report = match floor {
        Some(eps) if !(eps > 0.0 && eps.is_finite()) => {
            bail!(usage(format!("--floor-epsilon must be positive, got {eps}")))
        }
        Some(eps) => kl(&FlooredModel::new(&model, &data.table, eps), &data.table, reference, &events)?,
        None => kl(&model, &data.table, reference, &events)?,
    };
    let meta = RunMeta::new(
        "kl-report",
        json!({ "estimator": est, "reference": reference, "floor_epsilon": floor, "mode": data.table.mode() }),
        &data.input_refs(),
    );
    emit(args.out.as_deref(), &json_document(&meta, &KlDocument { estimator: est, floor_epsilon: floor, kl: report }))
}

pub fn unseen_report(args: &UnseenArgs) -> Result<()> {
    let data = args.data.load()?;
    if data.table.mode() != CorpusMode::Continuous {
        bail!("unseen-n-gram reports need continuous-mode counts");
    }
    let heldout = TokenSequence::concat(&data.seqs);
    let table = &data.table;
    let models = [
        SmoothedModel::new(table, Estimator::Mle)?,
        SmoothedModel::new(table, Estimator::Interpolated { lambda: args.lambda })?,
        SmoothedModel::new(table, Estimator::AbsoluteDiscount { discount: args.discount })?,
        SmoothedModel::new(table, Estimator::KneserNey { discount: args.discount })?,
    ];
    let mut inputs = data.input_refs();
    let train_in;
    let empirical;
    let noised;
    let mut list: Vec<(&str, &dyn BigramModel)> =
        models.iter().map(|m| (m.estimator().name(), m as &dyn BigramModel)).collect();
    if let Some(path) = &args.train_corpus {
        let gamma = args.gamma.expect("required by clap");
        train_in = Input::load("train_corpus", path)?;
        let vocab = data.inputs[1].vocabulary()?;
        let seq = Corpus::encode(&train_in, &vocab, CorpusMode::Continuous)?.stream();
        if seq.len() as u64 != table.total_tokens() {
            bail!("{} was not the corpus the counts were built from", train_in.record.name);
        }
        empirical = empirical_pseudocounts(&seq, table, gamma, args.n_samples, args.seed)?;
        noised = NoisedEmpiricalModel::new(table, &empirical);
        list.push(("noised_empirical", &noised));
        inputs.push(&train_in);
    }
    let report = unseen_ngram_report(table, &heldout, &list)?;
    let meta = RunMeta::new(
        "unseen-report",
        json!({
            "lambda": args.lambda,
            "discount": args.discount,
            "noised_empirical": args.train_corpus.as_ref().map(|_| json!({
                "gamma": args.gamma,
                "n_samples": args.n_samples,
                "seed": args.seed,
            })),
        }),
        &inputs,
    );
    emit(args.out.as_deref(), &json_document(&meta, &report))
}
