// Copyright 2026 The semloss Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use semloss::corpus::{
    bigram_stats, build_vocab, corpus_pairs, load_corpus, split_dialogues, tokenize, write_pairs, BigramStats,
    CorpusError, Dialogue, TokenId, TrainingPair, Vocabulary, DEFAULT_CONTEXT_CAP, SEP,
};
use semloss::decoding::{beam_search, greedy_decode, sample_decode};
use semloss::embeddings::{load_embeddings, EmbeddingTable};
use semloss::exec::Execution;
use semloss::metrics::METRICS_CSV_HEADER;
use semloss::model::{Checkpoint, Seq2Seq};
use semloss::synth::{synth_dialogues, synth_embeddings, SynthConfig};
use semloss::trainer::{
    alpha_grid, emit_reports, evaluate, select_run, train_seeds, Dataset, RunOptions, RunRecord, SelectionCriterion,
    TrainError, TrainingConfig,
};

use crate::manifest::write_manifest;
use crate::{
    CompareArgs, EvalArgs, GenerateArgs, Mode, Overrides, PrepareArgs, Split, SweepArgs, SynthArgs, TrainArgs,
};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<(), Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

trait OrFail<T> {
    fn usage_err(self) -> Result<T, Failure>;
    fn runtime_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn usage_err(self) -> Result<T, Failure> {
        self.map_err(usage)
    }

    fn runtime_err(self) -> Result<T, Failure> {
        self.map_err(runtime)
    }
}

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(anyhow!("{what} {} does not exist", path.display())))
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Dialogue>, Failure> {
    require_file(path, "corpus")?;
    let (dialogues, report) = load_corpus(path).map_err(|e| match e {
        CorpusError::Io { .. } => usage(e),
        other => runtime(other),
    })?;
    for v in &report.alternation_violations {
        eprintln!("warning: line {}: consecutive turns by the same speaker", v.line);
    }
    Ok(dialogues)
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .runtime_err()
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .runtime_err()
}

fn finish_dir(dir: &Path) -> CmdResult {
    write_manifest(dir)
        .with_context(|| format!("writing manifest in {}", dir.display()))
        .runtime_err()
}

/// Context bigrams are counted within each SEP-delimited utterance of every
/// pair's context; target bigrams over each response without EOS.
pub fn pair_bigram_stats(pairs: &[TrainingPair]) -> (BigramStats, BigramStats) {
    let context = bigram_stats(pairs.iter().flat_map(|p| p.context_utterances()));
    let target = bigram_stats(pairs.iter().map(|p| p.response()));
    (context, target)
}

fn stats_table(context: &BigramStats, target: &BigramStats) -> String {
    let mut s = String::from("segment\tunique\ttotal\taverage_occurrence\n");
    for (name, st) in [("context", context), ("target", target)] {
        writeln!(
            s,
            "{name}\t{}\t{}\t{}",
            st.unique(),
            st.total(),
            st.average_occurrence()
        )
        .expect("string write");
    }
    s
}

pub fn prepare(a: PrepareArgs) -> CmdResult {
    if !(a.valid_fraction > 0.0 && a.valid_fraction < 1.0) {
        return Err(usage(anyhow!("--valid-fraction must lie in (0, 1)")));
    }
    if a.min_count == 0 || a.context_cap == 0 {
        return Err(usage(anyhow!("--min-count and --context-cap must be positive")));
    }
    let dialogues = read_corpus(&a.corpus)?;
    let (train_d, valid_d) = split_dialogues(&dialogues, a.valid_fraction);
    let train = corpus_pairs(&train_d, a.context_cap);
    let valid = corpus_pairs(&valid_d, a.context_cap);
    if train.is_empty() {
        return Err(runtime(anyhow!("corpus yields no training pairs")));
    }
    let vocab = build_vocab(&train, a.min_count);
    create_dir(&a.out_dir)?;
    vocab.save(&a.out_dir.join("vocab.txt")).runtime_err()?;
    write_pairs(&a.out_dir.join("train_pairs.jsonl"), &train).runtime_err()?;
    write_pairs(&a.out_dir.join("valid_pairs.jsonl"), &valid).runtime_err()?;
    let all: Vec<TrainingPair> = train.iter().chain(&valid).cloned().collect();
    let (context, target) = pair_bigram_stats(&all);
    write_file(&a.out_dir.join("bigram_stats.tsv"), &stats_table(&context, &target))?;
    finish_dir(&a.out_dir)?;
    println!(
        "{} dialogues, {} train pairs, {} validation pairs, vocabulary {}",
        dialogues.len(),
        train.len(),
        valid.len(),
        vocab.len()
    );
    print!("{}", stats_table(&context, &target));
    Ok(())
}

fn build_config(config: Option<&Path>, overrides: &Overrides) -> Result<TrainingConfig, Failure> {
    let mut cfg = match config {
        Some(p) => {
            require_file(p, "config file")?;
            TrainingConfig::load_unvalidated(p).usage_err()?
        }
        None => TrainingConfig::default(),
    };
    for (k, v) in overrides.pairs() {
        cfg.set(k, v).usage_err()?;
    }
    cfg.validate().usage_err()?;
    Ok(cfg)
}

fn load_table(path: Option<&Path>, vocab: Option<&Vocabulary>) -> Result<Option<EmbeddingTable>, Failure> {
    match path {
        None => Ok(None),
        Some(p) => {
            require_file(p, "embedding file")?;
            load_embeddings(p, vocab).map(Some).runtime_err()
        }
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

struct RunSummary {
    records: Vec<RunRecord>,
    diverged: Vec<String>,
}

/// Train every seed into `dir` and write reports; divergences are collected.
fn run_training(cfg: &TrainingConfig, exec: Execution, dir: &Path) -> Result<RunSummary, Failure> {
    let corpus = cfg
        .corpus
        .as_deref()
        .ok_or_else(|| usage(anyhow!("no corpus given (set `corpus` or pass --corpus)")))?;
    let dialogues = read_corpus(corpus)?;
    let data = Dataset::from_dialogues(&dialogues, cfg);
    let table = load_table(cfg.embedding_file.as_deref(), Some(&data.vocab))?;
    create_dir(dir)?;
    write_file(&dir.join("config.txt"), &cfg.to_file_string())?;
    data.vocab.save(&dir.join("vocab.txt")).runtime_err()?;
    eprintln!(
        "{} train pairs, {} validation pairs, vocabulary {}",
        data.train.len(),
        data.valid.len(),
        data.vocab.len()
    );

    let options = RunOptions {
        exec,
        checkpoint_dir: Some(dir.to_path_buf()),
    };
    let mut records = Vec::new();
    let mut diverged = Vec::new();
    for (seed, outcome) in cfg.seeds.iter().zip(train_seeds(cfg, &data, table.as_ref(), &options)) {
        match outcome {
            Ok(o) => records.push(o.record),
            Err(TrainError::Diverged {
                step, reason, record, ..
            }) => {
                let kept = match record.checkpoints.last() {
                    Some((s, p)) => format!("last good checkpoint {} (step {s})", p.display()),
                    None => "no checkpoint was written before divergence".to_string(),
                };
                diverged.push(format!("seed {seed} diverged at step {step}: {reason}; {kept}"));
                records.push(*record);
            }
            Err(e) => return Err(runtime(anyhow!("seed {seed}: {e}"))),
        }
    }
    emit_reports(&records, dir).runtime_err()?;
    let mut selection = String::new();
    for c in [
        SelectionCriterion::BestBleu,
        SelectionCriterion::Distinct2EarlySaturation,
    ] {
        if let Ok(i) = select_run(&records, c) {
            writeln!(selection, "{c}\tseed {}", records[i].seed).expect("string write");
        }
    }
    write_file(&dir.join("selection.txt"), &selection)?;
    finish_dir(dir)?;
    Ok(RunSummary { records, diverged })
}

pub fn train(a: TrainArgs) -> CmdResult {
    let cfg = build_config(a.config.as_deref(), &a.overrides)?;
    let summary = run_training(&cfg, execution(a.sequential), &a.out_dir)?;
    for r in &summary.records {
        if let Some((step, m)) = r.metrics.last() {
            println!(
                "seed {}: step {step} bleu {:.4} distinct2 {:.4} unseen {:.4}",
                r.seed,
                m.bleu,
                m.distinct2(),
                m.unseen_fraction()
            );
        }
    }
    if summary.diverged.is_empty() {
        Ok(())
    } else {
        Err(runtime(anyhow!(summary.diverged.join("\n"))))
    }
}

pub fn sweep(a: SweepArgs) -> CmdResult {
    let base = build_config(a.config.as_deref(), &a.overrides)?;
    if a.points == 0 {
        return Err(usage(anyhow!("--points must be positive")));
    }
    if base.embedding_file.is_none() {
        return Err(usage(anyhow!("the sweep needs --embedding-file")));
    }
    create_dir(&a.out_dir)?;
    let mut csv = String::from("alpha,seed,status,last_step,bleu,distinct2,unseen_frac\n");
    for alpha in alpha_grid(a.points) {
        let cfg = TrainingConfig { alpha, ..base.clone() };
        let dir = a.out_dir.join(format!("alpha-{alpha:.4}"));
        let summary = run_training(&cfg, execution(a.sequential), &dir)?;
        for r in &summary.records {
            let status = if r.divergence.is_some() { "diverged" } else { "ok" };
            let (step, m) = r.metrics.last().cloned().unwrap_or_default();
            writeln!(
                csv,
                "{alpha},{},{status},{step},{},{},{}",
                r.seed,
                m.bleu,
                m.distinct2(),
                m.unseen_fraction()
            )
            .expect("string write");
        }
        for d in &summary.diverged {
            eprintln!("alpha {alpha}: {d}");
        }
    }
    write_file(&a.out_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Seq2Seq, Vocabulary), Failure> {
    require_file(path, "checkpoint")?;
    let ck = Checkpoint::load(path).runtime_err()?;
    let model = ck.to_model().runtime_err()?;
    let vocab = Vocabulary::parse(&ck.vocab.join("\n")).runtime_err()?;
    if vocab.hash() != ck.vocab_hash {
        return Err(runtime(anyhow!(
            "checkpoint vocabulary does not match its recorded hash"
        )));
    }
    Ok((ck, model, vocab))
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let (ck, model, vocab) = load_checkpoint(&a.checkpoint)?;
    let cfg = TrainingConfig::from_entries(&ck.config).usage_err()?;
    let dialogues = read_corpus(&a.corpus)?;
    let data = Dataset::from_dialogues(&dialogues, &cfg);
    if data.vocab.hash() != ck.vocab_hash {
        return Err(usage(anyhow!(
            "incompatible vocabulary: checkpoint has {} ({} tokens), corpus gives {} ({} tokens)",
            ck.vocab_hash,
            vocab.len(),
            data.vocab.hash(),
            data.vocab.len()
        )));
    }
    let data = match a.split {
        Split::Valid => data,
        Split::Train => Dataset::with_vocab(data.vocab, data.train.clone(), data.train),
        Split::All => {
            let all: Vec<TrainingPair> = data.train.iter().chain(&data.valid).cloned().collect();
            Dataset::with_vocab(data.vocab, data.train, all)
        }
    };
    let table = load_table(a.embedding_file.as_deref(), Some(&data.vocab))?;
    let report = evaluate(&model, &data, table.as_ref(), a.max_len, Execution::Parallel).runtime_err()?;
    println!("{report}");
    if let Some(out) = &a.out {
        write_file(out, &format!("{METRICS_CSV_HEADER}\n{}\n", report.csv_row(0)))?;
    }
    Ok(())
}

/// Tab-separated turns joined with SEP, cut from the left to `cap` tokens.
fn parse_context(line: &str, vocab: &Vocabulary, cap: usize) -> Vec<TokenId> {
    let mut ids = Vec::new();
    for (i, turn) in line.split('\t').enumerate() {
        if i > 0 {
            ids.push(SEP);
        }
        ids.extend(vocab.encode(&tokenize(turn)).0);
    }
    let start = ids.len().saturating_sub(cap);
    ids.split_off(start)
}

fn render(vocab: &Vocabulary, ids: &[TokenId]) -> String {
    let words: Vec<&str> = ids
        .iter()
        .filter(|&&i| !semloss::corpus::is_special_id(i) || i == semloss::corpus::UNK)
        .map(|&i| vocab.token(i))
        .collect();
    words.join(" ")
}

fn context_cap(ck: &Checkpoint) -> usize {
    ck.config_value("context-cap")
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_CONTEXT_CAP)
}

fn read_lines(input: Option<&Path>) -> Result<Vec<String>, Failure> {
    match input {
        Some(p) => {
            require_file(p, "input")?;
            let text = std::fs::read_to_string(p).runtime_err()?;
            Ok(text.lines().map(str::to_string).collect())
        }
        None => std::io::stdin().lock().lines().collect::<Result<_, _>>().runtime_err(),
    }
}

pub fn generate(a: GenerateArgs) -> CmdResult {
    if a.max_len == 0 || a.beam_width == 0 {
        return Err(usage(anyhow!("--max-len and --beam-width must be positive")));
    }
    let (ck, model, vocab) = load_checkpoint(&a.checkpoint)?;
    let cap = context_cap(&ck);
    let lines = read_lines(a.input.as_deref())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (n, line) in lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ctx = parse_context(line, &vocab, cap);
        let text = match a.mode {
            Mode::Greedy => render(&vocab, &greedy_decode(&model, &ctx, a.max_len).runtime_err()?) + "\n",
            Mode::Sample => {
                let seed = a.seed.wrapping_add(n as u64);
                render(&vocab, &sample_decode(&model, &ctx, a.max_len, seed).runtime_err()?) + "\n"
            }
            Mode::Beam => {
                let beams = beam_search(&model, &ctx, a.beam_width, a.max_len).runtime_err()?;
                beams
                    .iter()
                    .enumerate()
                    .map(|(r, h)| format!("{}\t{:.6}\t{}\n", r + 1, h.score(), render(&vocab, &h.tokens)))
                    .collect()
            }
        };
        out.write_all(text.as_bytes()).runtime_err()?;
    }
    Ok(())
}

pub fn compare_beams(a: CompareArgs) -> CmdResult {
    if a.max_len == 0 || a.beam_width == 0 {
        return Err(usage(anyhow!("--max-len and --beam-width must be positive")));
    }
    let models = [
        (a.label_a.as_str(), load_checkpoint(&a.checkpoint_a)?),
        (a.label_b.as_str(), load_checkpoint(&a.checkpoint_b)?),
    ];
    let lines = read_lines(Some(&a.contexts))?;
    let mut s = format!(
        "# beams per context; {} = {}, {} = {}; columns: rank, length-normalised log-probability, response\n",
        a.label_a,
        a.checkpoint_a.display(),
        a.label_b,
        a.checkpoint_b.display()
    );
    for (n, line) in lines.iter().filter(|l| !l.trim().is_empty()).enumerate() {
        writeln!(s, "\ncontext {}: {}", n + 1, line.replace('\t', " | ")).expect("string write");
        for (label, (ck, model, vocab)) in &models {
            let ctx = parse_context(line, vocab, context_cap(ck));
            writeln!(s, "  {label}").expect("string write");
            for (r, h) in beam_search(model, &ctx, a.beam_width, a.max_len)
                .runtime_err()?
                .iter()
                .enumerate()
            {
                writeln!(s, "    {}\t{:.6}\t{}", r + 1, h.score(), render(vocab, &h.tokens)).expect("string write");
            }
        }
    }
    write_file(&a.out, &s)
}

pub fn synth(a: SynthArgs) -> CmdResult {
    if a.dialogues == 0 || a.embedding_dim == 0 {
        return Err(usage(anyhow!("--dialogues and --embedding-dim must be positive")));
    }
    let cfg = SynthConfig {
        dialogues: a.dialogues,
        seed: a.seed,
        embedding_dim: a.embedding_dim,
    };
    create_dir(&a.out_dir)?;
    let corpus = a.out_dir.join("corpus.jsonl");
    semloss::corpus::write_corpus(&corpus, &synth_dialogues(&cfg)).runtime_err()?;
    let vectors: PathBuf = a.out_dir.join("embeddings.txt");
    write_file(&vectors, &synth_embeddings(&cfg).to_text())?;
    println!("wrote {} and {}", corpus.display(), vectors.display());
    Ok(())
}
