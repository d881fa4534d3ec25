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

//! Automatic evaluation metrics.
//!
//! All functions strip reserved tokens (PAD, UNK, BOS, EOS, SEP) from every
//! sequence first, and every ratio counts n-gram *occurrences* in the
//! denominator.
//!
//! BLEU is corpus-level BLEU-4 with uniform weights:
//!
//! * `p_n = clipped matches / candidate n-grams`, summed over the corpus;
//! * for `n ≥ 2`, a zero match count becomes `p_n = 1 / (candidate n-grams + 1)`
//!   (add-one on the zero count, so a candidate shorter than `n` gives `p_n = 1`);
//! * no smoothing for unigrams, so a corpus with no unigram overlap scores 0;
//! * brevity penalty `exp(1 − r/c)` when total candidate length `c` is below
//!   total reference length `r`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_special_token, BigramStats};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("distinct-n is defined for n in {{1, 2}}, got {0}")]
    UnsupportedOrder(usize),
}

pub fn strip_special<S: AsRef<str>>(tokens: &[S]) -> Vec<&str> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_special_token(t))
        .collect()
}

/// `numerator / denominator`, 0 when the denominator is 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        debug_assert!(numerator <= denominator);
        Self { numerator, denominator }
    }

    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }
}

pub fn distinct_n_counts<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R], n: usize) -> Result<Ratio, MetricsError> {
    if !(1..=2).contains(&n) {
        return Err(MetricsError::UnsupportedOrder(n));
    }
    let mut unique: BTreeSet<Vec<&str>> = BTreeSet::new();
    let mut total = 0u64;
    for r in responses {
        let toks = strip_special(r.as_ref());
        for g in toks.windows(n) {
            unique.insert(g.to_vec());
            total += 1;
        }
    }
    Ok(Ratio::new(unique.len() as u64, total))
}

/// Distinct n-grams over total n-grams across all responses.
pub fn distinct_n<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R], n: usize) -> Result<f64, MetricsError> {
    distinct_n_counts(responses, n).map(|r| r.value())
}

pub fn unseen_bigram_counts<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R], training_targets: &BigramStats) -> Ratio {
    let mut unseen = 0u64;
    let mut total = 0u64;
    for r in responses {
        let toks = strip_special(r.as_ref());
        for w in toks.windows(2) {
            total += 1;
            if !training_targets.contains(w[0], w[1]) {
                unseen += 1;
            }
        }
    }
    Ratio::new(unseen, total)
}

/// Share of generated bigram occurrences absent from the training targets.
pub fn unseen_bigram_fraction<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R], training_targets: &BigramStats) -> f64 {
    unseen_bigram_counts(responses, training_targets).value()
}

pub fn word_repeat_counts<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R]) -> Ratio {
    let mut repeats = 0u64;
    let mut total = 0u64;
    for r in responses {
        let toks = strip_special(r.as_ref());
        for w in toks.windows(2) {
            total += 1;
            if w[0] == w[1] {
                repeats += 1;
            }
        }
    }
    Ratio::new(repeats, total)
}

/// Share of generated bigrams whose two tokens are identical.
pub fn word_repeat_fraction<R: AsRef<[S]>, S: AsRef<str>>(responses: &[R]) -> f64 {
    word_repeat_counts(responses).value()
}

/// Bigram statistics of the training targets, special tokens stripped.
pub fn target_bigrams<R: AsRef<[S]>, S: AsRef<str>>(targets: &[R]) -> BigramStats {
    let mut stats = BigramStats::new();
    for t in targets {
        stats.add_sentence(&strip_special(t.as_ref()));
    }
    stats
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; 4],
    pub totals: [u64; 4],
    pub candidate_len: u64,
    pub reference_len: u64,
}

impl BleuStats {
    /// Smoothed modified precisions `p_1..p_4`.
    pub fn precisions(&self) -> [f64; 4] {
        std::array::from_fn(|n| {
            if n > 0 && self.matches[n] == 0 {
                1.0 / (self.totals[n] + 1) as f64
            } else if self.totals[n] == 0 {
                0.0
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            }
        })
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.candidate_len == 0 {
            0.0
        } else if self.candidate_len >= self.reference_len {
            1.0
        } else {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        }
    }

    pub fn score(&self) -> f64 {
        let p = self.precisions();
        if p[0] == 0.0 {
            return 0.0;
        }
        let log_mean = p.iter().map(|x| x.ln()).sum::<f64>() / 4.0;
        (self.brevity_penalty() * log_mean.exp()).clamp(0.0, 1.0)
    }
}

pub fn bleu_stats<C, R, S, T>(candidates: &[C], references: &[R]) -> Result<BleuStats, MetricsError>
where
    C: AsRef<[S]>,
    R: AsRef<[T]>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    if candidates.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        let c = strip_special(c.as_ref());
        let r = strip_special(r.as_ref());
        stats.candidate_len += c.len() as u64;
        stats.reference_len += r.len() as u64;
        for n in 1..=4 {
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in r.windows(n) {
                *ref_counts.entry(g).or_default() += 1;
            }
            let mut cand_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in c.windows(n) {
                *cand_counts.entry(g).or_default() += 1;
            }
            for (g, cnt) in cand_counts {
                stats.matches[n - 1] += cnt.min(ref_counts.get(g).copied().unwrap_or(0));
                stats.totals[n - 1] += cnt;
            }
        }
    }
    Ok(stats)
}

/// Corpus BLEU-4 in `[0, 1]`; one reference per candidate.
pub fn bleu<C, R, S, T>(candidates: &[C], references: &[R]) -> Result<f64, MetricsError>
where
    C: AsRef<[S]>,
    R: AsRef<[T]>,
    S: AsRef<str>,
    T: AsRef<str>,
{
    bleu_stats(candidates, references).map(|s| s.score())
}

pub const METRICS_CSV_HEADER: &str = "step,bleu,distinct1,distinct2,unseen_frac,word_repeat_frac,mean_d_sem";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub bleu: f64,
    pub distinct1: Ratio,
    pub distinct2: Ratio,
    pub unseen: Ratio,
    pub word_repeat: Ratio,
    pub d_sem_sum: f64,
    pub d_sem_count: u64,
}

impl MetricsReport {
    pub fn distinct1(&self) -> f64 {
        self.distinct1.value()
    }

    pub fn distinct2(&self) -> f64 {
        self.distinct2.value()
    }

    pub fn unseen_fraction(&self) -> f64 {
        self.unseen.value()
    }

    pub fn word_repeat_fraction(&self) -> f64 {
        self.word_repeat.value()
    }

    pub fn mean_d_sem(&self) -> f64 {
        if self.d_sem_count == 0 {
            0.0
        } else {
            self.d_sem_sum / self.d_sem_count as f64
        }
    }

    pub fn csv_row(&self, step: u64) -> String {
        format!(
            "{step},{},{},{},{},{},{}",
            self.bleu,
            self.distinct1(),
            self.distinct2(),
            self.unseen_fraction(),
            self.word_repeat_fraction(),
            self.mean_d_sem()
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ratio = |r: &Ratio| format!("{:.4} ({}/{})", r.value(), r.numerator, r.denominator);
        writeln!(f, "BLEU-4            {:.4}", self.bleu)?;
        writeln!(f, "distinct-1        {}", ratio(&self.distinct1))?;
        writeln!(f, "distinct-2        {}", ratio(&self.distinct2))?;
        writeln!(f, "% unseen bigrams  {}", ratio(&self.unseen))?;
        writeln!(f, "word repeats      {}", ratio(&self.word_repeat))?;
        write!(f, "mean d_sem        {:.4} (n={})", self.mean_d_sem(), self.d_sem_count)
    }
}
