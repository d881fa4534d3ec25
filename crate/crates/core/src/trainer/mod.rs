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

//! Training runs: batching, the combined objective, Adam updates, periodic
//! greedy evaluation, checkpointing and divergence handling.
//!
//! A batch gradient is the in-order sum over pairs of the gradient of
//! `(nll_i + alpha · sem_i) / B`, each pair on its own tape. Pairs are
//! processed in three phases so the work can run data-parallel while the
//! result stays independent of thread count:
//!
//! 1. per pair: encode, teacher-forced log-probabilities and, when
//!    `alpha > 0`, a sampled response. Each pair's sampler is seeded from
//!    the run's `sampling` and `masking` streams, drawn in batch order;
//! 2. in batch order: rewards and advantages against the shared baseline;
//! 3. per pair: the REINFORCE term and the backward pass.
//!
//! With `alpha = 0` phases 2 and 3 reduce to the NLL and no random stream
//! other than `data` (shuffling) is touched.

mod config;
mod report;
mod select;

pub use config::{ConfigError, InitMode, TrainingConfig, CONFIG_KEYS};
pub use report::{emit_reports, LOSSES_CSV_HEADER};
pub use select::{select_run, SelectionCriterion};

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{
    build_vocab, corpus_pairs, split_dialogues, BigramStats, Dialogue, EncodedPair, TrainingPair, Vocabulary,
};
use crate::decoding::greedy_decode;
use crate::embeddings::{init_input_embeddings, semantic_distance, CoverageReport, EmbeddingTable};
use crate::exec::Execution;
use crate::metrics::{self, MetricsReport};
use crate::model::{CheckpointError, ModelConfig, ModelError, SampleOptions, SampledResponse, Seq2Seq};
use crate::numcore::{AdamConfig, AdamState, Graph, NumError, ParamGrads, RunRng, Var};
use crate::objectives::{
    combined_loss, reinforce_term, score_sample, sequence_nll, LossBreakdown, ObjectiveError, RewardBaseline,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no training pairs")]
    EmptyTraining,
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("no run records to select from")]
    NoRecords,
    #[error("an embedding table is required when alpha > 0 or init-mode = from-table")]
    MissingTable,
    #[error("seed {seed} diverged at step {step}: {reason}")]
    Diverged {
        seed: u64,
        step: u64,
        reason: String,
        record: Box<RunRecord>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub step: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub metrics: Vec<(u64, MetricsReport)>,
    pub losses: Vec<(u64, LossBreakdown)>,
    pub checkpoints: Vec<(u64, PathBuf)>,
    pub coverage: Option<CoverageReport>,
    pub divergence: Option<Divergence>,
}

impl RunRecord {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            metrics: Vec::new(),
            losses: Vec::new(),
            checkpoints: Vec::new(),
            coverage: None,
            divergence: None,
        }
    }

    pub fn final_metrics(&self) -> Option<&MetricsReport> {
        self.metrics.last().map(|(_, m)| m)
    }
}

/// A finished run and its final model.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub model: Seq2Seq,
}

/// Vocabulary and encoded train/validation pairs.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub train: Vec<TrainingPair>,
    pub valid: Vec<TrainingPair>,
    pub train_encoded: Vec<EncodedPair>,
    pub valid_encoded: Vec<EncodedPair>,
    /// Bigrams of the training targets, reserved tokens stripped.
    pub target_bigrams: BigramStats,
}

impl Dataset {
    /// Split by dialogue id hash, extract pairs, build the vocabulary from
    /// the training split.
    pub fn from_dialogues(dialogues: &[Dialogue], config: &TrainingConfig) -> Self {
        let (train, valid) = split_dialogues(dialogues, config.valid_fraction);
        let train = corpus_pairs(&train, config.context_cap);
        let valid = corpus_pairs(&valid, config.context_cap);
        let vocab = build_vocab(&train, config.min_count);
        Self::with_vocab(vocab, train, valid)
    }

    pub fn with_vocab(vocab: Vocabulary, train: Vec<TrainingPair>, valid: Vec<TrainingPair>) -> Self {
        let encode = |pairs: &[TrainingPair]| -> Vec<EncodedPair> {
            pairs.iter().map(|p| EncodedPair::encode(p, &vocab).0).collect()
        };
        let train_encoded = encode(&train);
        let valid_encoded = encode(&valid);
        let targets: Vec<&[String]> = train.iter().map(|p| p.target.as_slice()).collect();
        let target_bigrams = metrics::target_bigrams(&targets);
        Self {
            vocab,
            train,
            valid,
            train_encoded,
            valid_encoded,
            target_bigrams,
        }
    }
}

/// Settings that do not change the numbers a run produces.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub exec: Execution,
    /// Where to keep the latest checkpoint; `None` disables checkpointing.
    pub checkpoint_dir: Option<PathBuf>,
}

/// Trailing-window watch on the NLL. Fires on a non-finite loss or when the
/// trailing mean exceeds `factor` times the best trailing mean seen so far.
#[derive(Clone, Debug)]
pub struct DivergenceMonitor {
    window: usize,
    factor: f64,
    recent: VecDeque<f64>,
    best: Option<f64>,
}

impl DivergenceMonitor {
    pub fn new(window: usize, factor: f64) -> Self {
        Self {
            window,
            factor,
            recent: VecDeque::with_capacity(window),
            best: None,
        }
    }

    pub fn observe(&mut self, b: &LossBreakdown) -> Option<String> {
        if ![b.mle_loss, b.sem_loss, b.total].iter().all(|v| v.is_finite()) {
            return Some(format!("non-finite loss (mle {}, total {})", b.mle_loss, b.total));
        }
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(b.mle_loss);
        if self.recent.len() < self.window {
            return None;
        }
        let mean = self.recent.iter().sum::<f64>() / self.window as f64;
        match self.best {
            Some(best) if mean > self.factor * best => Some(format!(
                "trailing {}-step NLL mean {mean:.4} exceeds {} x best {best:.4}",
                self.window, self.factor
            )),
            Some(best) if mean >= best => None,
            _ => {
                self.best = Some(mean);
                None
            }
        }
    }
}

/// Initial model for `seed`: non-embedding weights always come from the
/// `init` stream in the same order, so both init modes share them.
pub fn init_model(
    config: &TrainingConfig,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    seed: u64,
) -> Result<(Seq2Seq, Option<CoverageReport>), TrainError> {
    let cfg = ModelConfig::new(vocab.len(), config.embedding_size, config.hidden_size);
    let mut init = RunRng::new(seed).init;
    match config.init_mode {
        InitMode::Random => Ok((Seq2Seq::random(cfg, &mut init), None)),
        InitMode::FromTable => {
            let table = table.ok_or(TrainError::MissingTable)?;
            let mut proj = RunRng::projection(seed);
            let (emb, cov) = init_input_embeddings(vocab, table, config.embedding_size, &mut init, &mut proj);
            Ok((Seq2Seq::with_embedding(cfg, emb, &mut init), Some(cov)))
        }
    }
}

fn is_divergence(e: &TrainError) -> bool {
    let num = match e {
        TrainError::Num(n) => n,
        TrainError::Model(ModelError::Num(n)) => n,
        TrainError::Objective(ObjectiveError::Num(n)) => n,
        _ => return false,
    };
    matches!(num, NumError::NonFinite { .. } | NumError::Divergence { .. })
}

struct PairTape<'p> {
    graph: Graph<'p>,
    mle: Var,
    sample: Option<SampledResponse>,
}

/// Gradient and loss breakdown for one batch. Advances `baseline` and, when
/// `alpha > 0`, draws one value per pair from the sampling and masking
/// streams.
#[allow(clippy::too_many_arguments)]
pub fn batch_gradients(
    model: &Seq2Seq,
    batch: &[&EncodedPair],
    config: &TrainingConfig,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    baseline: &mut RewardBaseline,
    rng: &mut RunRng,
    exec: Execution,
) -> Result<(ParamGrads, LossBreakdown), TrainError> {
    let semantic = config.alpha > 0.0;
    let table = match (semantic, table) {
        (true, None) => return Err(TrainError::MissingTable),
        (_, t) => t,
    };
    let inv_b = 1.0 / batch.len() as f64;
    let seeds: Vec<Option<(u64, u64)>> = batch
        .iter()
        .map(|_| semantic.then(|| (rng.sampling.next_u64(), rng.masking.next_u64())))
        .collect();
    let options = SampleOptions {
        max_len: config.max_len,
        p_drop: config.p_drop,
    };

    let tapes = exec.map_indexed(batch.len(), |i| -> Result<PairTape<'_>, TrainError> {
        let pair = batch[i];
        let mut g = Graph::with_params(model.params());
        let state = model.encode_graph(&mut g, &pair.context)?;
        let lps = model.teacher_forced_from(&mut g, state, &pair.target)?;
        let nll = sequence_nll(&mut g, &lps)?;
        let mle = g.scale(nll, inv_b)?;
        let sample = match seeds[i] {
            Some((s, m)) => {
                let mut sampling = ChaCha8Rng::seed_from_u64(s);
                let mut masking = ChaCha8Rng::seed_from_u64(m);
                Some(model.sample_response(&mut g, state, options, &mut sampling, &mut masking)?)
            }
            None => None,
        };
        Ok(PairTape { graph: g, mle, sample })
    });
    let tapes = tapes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut advantages = Vec::with_capacity(tapes.len());
    let (mut d_sum, mut a_sum) = (0.0, 0.0);
    for (tape, pair) in tapes.iter().zip(batch) {
        let adv = match (&tape.sample, table) {
            (Some(s), Some(table)) => {
                let sampled = vocab.decode(&s.tokens);
                let target = vocab.decode(&pair.target);
                let step = score_sample(&sampled, &target, table, baseline);
                d_sum += step.d_sem;
                a_sum += step.advantage;
                Some(step.advantage)
            }
            _ => None,
        };
        advantages.push(adv);
    }

    let alpha = config.alpha;
    let results = exec.map_vec(
        tapes.into_iter().zip(advantages).collect(),
        |(mut tape, adv)| -> Result<(ParamGrads, LossBreakdown), TrainError> {
            let g = &mut tape.graph;
            let sem = match (&tape.sample, adv) {
                (Some(s), Some(a)) => {
                    let r = reinforce_term(g, &s.logprobs, a)?;
                    Some(g.scale(r, inv_b)?)
                }
                _ => None,
            };
            let (total, breakdown) = combined_loss(g, tape.mle, sem, alpha)?;
            let grads = g.backward(total)?;
            let mut acc = ParamGrads::zeros_like(model.params());
            g.accumulate_param_grads(&grads, &mut acc);
            Ok((acc, breakdown))
        },
    );

    let mut grads = ParamGrads::zeros_like(model.params());
    let mut out = LossBreakdown {
        alpha,
        ..LossBreakdown::default()
    };
    for r in results {
        let (g, b) = r?;
        grads.accumulate(&g);
        out.mle_loss += b.mle_loss;
        out.sem_loss += b.sem_loss;
        out.total += b.total;
    }
    if semantic {
        out.d_sem = d_sum * inv_b;
        out.advantage = a_sum * inv_b;
    }
    Ok((grads, out))
}

/// Greedy responses to every validation context, scored against the
/// references. `table` enables the mean d_sem column.
pub fn evaluate(
    model: &Seq2Seq,
    data: &Dataset,
    table: Option<&EmbeddingTable>,
    max_len: usize,
    exec: Execution,
) -> Result<MetricsReport, TrainError> {
    if data.valid.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let decoded = exec.map(&data.valid_encoded, |p| greedy_decode(model, &p.context, max_len));
    let responses = decoded
        .into_iter()
        .map(|r| r.map(|ids| data.vocab.decode(&ids)))
        .collect::<Result<Vec<_>, _>>()?;
    let references: Vec<&[String]> = data.valid.iter().map(TrainingPair::response).collect();
    evaluate_responses(&responses, &references, &data.target_bigrams, table)
}

/// Metrics for given responses, one per reference.
pub fn evaluate_responses<C, R, S, T>(
    responses: &[C],
    references: &[R],
    train_bigrams: &BigramStats,
    table: Option<&EmbeddingTable>,
) -> Result<MetricsReport, TrainError>
where
    C: AsRef<[S]>,
    R: AsRef<[T]>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if responses.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let resp: Vec<Vec<&str>> = responses
        .iter()
        .map(|r| r.as_ref().iter().map(AsRef::as_ref).collect())
        .collect();
    let refs: Vec<Vec<&str>> = references
        .iter()
        .map(|r| r.as_ref().iter().map(AsRef::as_ref).collect())
        .collect();
    let bleu = metrics::bleu(&resp, &refs).map_err(|_| TrainError::EmptyValidation)?;
    let (d_sem_sum, d_sem_count) = match table {
        Some(t) => (
            resp.iter().zip(&refs).map(|(a, b)| semantic_distance(a, b, t)).sum(),
            resp.len() as u64,
        ),
        None => (0.0, 0),
    };
    Ok(MetricsReport {
        bleu,
        distinct1: metrics::distinct_n_counts(&resp, 1).expect("order 1"),
        distinct2: metrics::distinct_n_counts(&resp, 2).expect("order 2"),
        unseen: metrics::unseen_bigram_counts(&resp, train_bigrams),
        word_repeat: metrics::word_repeat_counts(&resp),
        d_sem_sum,
        d_sem_count,
    })
}

/// Batches for one epoch: a fresh shuffle of the training indices drawn
/// from the `data` stream.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut RunRng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng.data);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn save_checkpoint(
    model: &Seq2Seq,
    data: &Dataset,
    config: &TrainingConfig,
    dir: &Path,
) -> Result<PathBuf, TrainError> {
    std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    let path = dir.join("checkpoint.json");
    let tmp = dir.join("checkpoint.json.tmp");
    model
        .to_checkpoint(&data.vocab.hash(), data.vocab.tokens(), config.entries())
        .save(&tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| TrainError::io(&path, e))?;
    Ok(path)
}

/// Train one seed.
pub fn train_run(
    config: &TrainingConfig,
    data: &Dataset,
    table: Option<&EmbeddingTable>,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutcome, TrainError> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTraining);
    }
    if data.valid.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let (mut model, coverage) = init_model(config, &data.vocab, table, seed)?;
    let mut rng = RunRng::new(seed);
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut baseline = RewardBaseline::new(config.baseline_window);
    let mut monitor = DivergenceMonitor::new(config.divergence_window, config.divergence_factor);
    let mut record = RunRecord::new(seed);
    record.coverage = coverage;

    let steps_per_epoch = data.train.len().div_ceil(config.batch_size) as u64;
    let mut last_step = steps_per_epoch * config.epochs as u64;
    if config.max_steps > 0 {
        last_step = last_step.min(config.max_steps);
    }

    let mut step = 0u64;
    'epochs: for _ in 0..config.epochs {
        for idx in epoch_batches(data.train.len(), config.batch_size, &mut rng) {
            if step == last_step {
                break 'epochs;
            }
            step += 1;
            let batch: Vec<&EncodedPair> = idx.iter().map(|&i| &data.train_encoded[i]).collect();
            let outcome = batch_gradients(
                &model,
                &batch,
                config,
                &data.vocab,
                table,
                &mut baseline,
                &mut rng,
                options.exec,
            )
            .and_then(|(grads, breakdown)| {
                if let Some(reason) = monitor.observe(&breakdown) {
                    return Ok(Err((breakdown, reason)));
                }
                adam.step(model.params_mut(), &grads)?;
                Ok(Ok(breakdown))
            });
            let stop = match outcome {
                Ok(Ok(b)) => {
                    record.losses.push((step, b));
                    None
                }
                Ok(Err((b, reason))) => {
                    record.losses.push((step, b));
                    Some(reason)
                }
                Err(e) if is_divergence(&e) => Some(e.to_string()),
                Err(e) => return Err(e),
            };
            if let Some(reason) = stop {
                record.divergence = Some(Divergence {
                    step,
                    reason: reason.clone(),
                });
                return Err(TrainError::Diverged {
                    seed,
                    step,
                    reason,
                    record: Box::new(record),
                });
            }
            if step.is_multiple_of(config.eval_every) || step == last_step {
                let report = evaluate(&model, data, table, config.max_len, options.exec)?;
                record.metrics.push((step, report));
                if let Some(dir) = &options.checkpoint_dir {
                    let path = save_checkpoint(&model, data, config, dir)?;
                    record.checkpoints.push((step, path));
                }
            }
        }
    }
    Ok(RunOutcome { record, model })
}

/// One run per configured seed, as independent workers. Checkpoints go to
/// `seed-<seed>/` under `options.checkpoint_dir`.
pub fn train_seeds(
    config: &TrainingConfig,
    data: &Dataset,
    table: Option<&EmbeddingTable>,
    options: &RunOptions,
) -> Vec<Result<RunOutcome, TrainError>> {
    options.exec.map(&config.seeds, |&seed| {
        let opts = RunOptions {
            exec: options.exec,
            checkpoint_dir: options.checkpoint_dir.as_ref().map(|d| d.join(format!("seed-{seed}"))),
        };
        train_run(config, data, table, seed, &opts)
    })
}

/// `points` values of alpha evenly spaced in log10 over `[-2, 2]`.
pub fn alpha_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        n => (0..n)
            .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / (n - 1) as f64))
            .collect(),
    }
}
