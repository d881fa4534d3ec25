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

//! Training objectives: teacher-forced NLL, the semantic REINFORCE loss and
//! their weighted sum.
//!
//! For one sampled response `w_1..w_T'` with reward `R = −d_sem` and
//! baseline `b` (mean of the last `W` rewards), the semantic term is
//!
//! ```text
//! L_sem = −(R − b) · Σ_t log P(w_t)
//! ```
//!
//! where the advantage `R − b` is a constant: no gradient flows through the
//! sampled tokens or the embedding table. Batches average per-sequence
//! terms, matching the NLL aggregation so `alpha` does not depend on batch
//! size.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{semantic_distance_detail, EmbeddingTable};
use crate::numcore::{Graph, NumError, Var};

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("alpha must be non-negative, got {0}")]
    NegativeAlpha(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Num(#[from] NumError),
}

pub const DEFAULT_BASELINE_WINDOW: usize = 20;

/// Moving-window mean of the most recent rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardBaseline {
    window: usize,
    rewards: VecDeque<f64>,
}

impl Default for RewardBaseline {
    fn default() -> Self {
        Self::new(DEFAULT_BASELINE_WINDOW)
    }
}

impl RewardBaseline {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "baseline window must hold at least one reward");
        Self {
            window,
            rewards: VecDeque::with_capacity(window),
        }
    }

    pub fn with_rewards(window: usize, rewards: &[f64]) -> Self {
        let mut b = Self::new(window);
        for &r in rewards {
            b.record(r);
        }
        b
    }

    /// Current baseline; 0 while no reward has been recorded.
    pub fn value(&self) -> f64 {
        if self.rewards.is_empty() {
            0.0
        } else {
            self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
        }
    }

    pub fn record(&mut self, reward: f64) {
        if self.rewards.len() == self.window {
            self.rewards.pop_front();
        }
        self.rewards.push_back(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn contents(&self) -> Vec<f64> {
        self.rewards.iter().copied().collect()
    }
}

/// Per-step record of the loss components, averaged over the batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mle_loss: f64,
    pub sem_loss: f64,
    pub d_sem: f64,
    pub advantage: f64,
    pub alpha: f64,
    pub total: f64,
}

/// `−Σ_t log P(target_t)` for one sequence.
pub fn sequence_nll(g: &mut Graph<'_>, logprobs: &[Var]) -> Result<Var, ObjectiveError> {
    let sum = g.add_many(logprobs)?;
    Ok(g.scale(sum, -1.0)?)
}

/// Mean over the batch of per-sequence negative log-likelihoods.
pub fn nll_loss(g: &mut Graph<'_>, batch: &[Vec<Var>]) -> Result<Var, ObjectiveError> {
    if batch.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let terms = batch
        .iter()
        .map(|lps| sequence_nll(g, lps))
        .collect::<Result<Vec<_>, _>>()?;
    mean_of(g, &terms)
}

fn mean_of(g: &mut Graph<'_>, terms: &[Var]) -> Result<Var, ObjectiveError> {
    let sum = g.add_many(terms)?;
    Ok(g.scale(sum, 1.0 / terms.len() as f64)?)
}

/// `−advantage · Σ_t log P(w_t)` with the advantage held constant.
pub fn reinforce_term(g: &mut Graph<'_>, logprobs: &[Var], advantage: f64) -> Result<Var, ObjectiveError> {
    let sum = g.add_many(logprobs)?;
    Ok(g.scale(sum, -advantage)?)
}

/// Reward bookkeeping for one sampled response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardStep {
    pub d_sem: f64,
    pub reward: f64,
    pub baseline: f64,
    pub advantage: f64,
    /// Either side had no in-table tokens.
    pub degenerate: bool,
}

/// Score a sample against its target and advance the baseline.
pub fn score_sample<S: AsRef<str>, T: AsRef<str>>(
    sampled_tokens: &[S],
    target_tokens: &[T],
    table: &EmbeddingTable,
    baseline: &mut RewardBaseline,
) -> RewardStep {
    let detail = semantic_distance_detail(sampled_tokens, target_tokens, table);
    let reward = -detail.distance;
    let b = baseline.value();
    baseline.record(reward);
    RewardStep {
        d_sem: detail.distance,
        reward,
        baseline: b,
        advantage: reward - b,
        degenerate: detail.is_degenerate(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SemanticTerm {
    pub loss: Var,
    pub reward: RewardStep,
}

/// Semantic loss for one sampled response; `baseline` holds the state
/// before this sample and is updated with its reward.
pub fn semantic_loss<S: AsRef<str>, T: AsRef<str>>(
    g: &mut Graph<'_>,
    sampled_logprobs: &[Var],
    sampled_tokens: &[S],
    target_tokens: &[T],
    table: &EmbeddingTable,
    baseline: &mut RewardBaseline,
) -> Result<SemanticTerm, ObjectiveError> {
    let reward = score_sample(sampled_tokens, target_tokens, table, baseline);
    let loss = reinforce_term(g, sampled_logprobs, reward.advantage)?;
    Ok(SemanticTerm { loss, reward })
}

/// Batch semantic loss: sequences are scored in order against the shared
/// baseline and the per-sequence terms averaged.
pub fn batch_semantic_loss<S: AsRef<str>, T: AsRef<str>>(
    g: &mut Graph<'_>,
    samples: &[(Vec<Var>, Vec<S>)],
    targets: &[Vec<T>],
    table: &EmbeddingTable,
    baseline: &mut RewardBaseline,
) -> Result<(Var, Vec<RewardStep>), ObjectiveError> {
    if samples.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let mut terms = Vec::with_capacity(samples.len());
    let mut rewards = Vec::with_capacity(samples.len());
    for ((lps, toks), target) in samples.iter().zip(targets) {
        let t = semantic_loss(g, lps, toks, target, table, baseline)?;
        terms.push(t.loss);
        rewards.push(t.reward);
    }
    Ok((mean_of(g, &terms)?, rewards))
}

/// `mle + alpha · sem`. With no semantic node the total is the NLL node.
pub fn combined_loss(
    g: &mut Graph<'_>,
    mle: Var,
    sem: Option<Var>,
    alpha: f64,
) -> Result<(Var, LossBreakdown), ObjectiveError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(ObjectiveError::NegativeAlpha(alpha));
    }
    let mle_loss = g.value(mle).item();
    let (total, sem_loss) = match sem {
        Some(sem) => {
            let weighted = g.scale(sem, alpha)?;
            (g.add(mle, weighted)?, g.value(sem).item())
        }
        None => (mle, 0.0),
    };
    let breakdown = LossBreakdown {
        mle_loss,
        sem_loss,
        alpha,
        total: g.value(total).item(),
        ..LossBreakdown::default()
    };
    Ok((total, breakdown))
}
