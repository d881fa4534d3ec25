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

//! Inference-time decoding: greedy, ancestral sampling and
//! length-normalised beam search.

use std::cmp::Ordering;

use crate::corpus::{TokenId, EOS};
use crate::model::{DecoderState, ModelError, Seq2Seq};
use crate::numcore::{sample_categorical, RunRng};

/// Anything that produces a next-token distribution step by step.
pub trait StepDecoder {
    type State: Clone;

    fn initial_state(&self, context: &[TokenId]) -> Result<Self::State, ModelError>;

    /// Distribution over the vocabulary for the next token, plus the state
    /// to pass to [`StepDecoder::feed`] once a token is chosen.
    fn next_distribution(&self, state: &Self::State) -> Result<(Vec<f64>, Self::State), ModelError>;

    fn feed(&self, state: Self::State, token: TokenId) -> Self::State;
}

impl StepDecoder for Seq2Seq {
    type State = DecoderState;

    fn initial_state(&self, context: &[TokenId]) -> Result<DecoderState, ModelError> {
        self.encode(context)
    }

    fn next_distribution(&self, state: &DecoderState) -> Result<(Vec<f64>, DecoderState), ModelError> {
        self.decode_step(state, None)
    }

    fn feed(&self, mut state: DecoderState, token: TokenId) -> DecoderState {
        state.last_token = token;
        state
    }
}

fn argmax(probs: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Most probable token at each step, ties to the smaller id. The returned
/// sequence ends with EOS unless it reached `max_len` first.
pub fn greedy_decode<M: StepDecoder + ?Sized>(
    model: &M,
    context: &[TokenId],
    max_len: usize,
) -> Result<Vec<TokenId>, ModelError> {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut state = model.initial_state(context)?;
    let mut out = Vec::new();
    while out.len() < max_len {
        let (probs, next) = model.next_distribution(&state)?;
        let tok = argmax(&probs);
        out.push(tok);
        if tok == EOS {
            break;
        }
        state = model.feed(next, tok);
    }
    Ok(out)
}

/// Ancestral sampling with the `sampling` stream of `RunRng::new(seed)`.
pub fn sample_decode<M: StepDecoder + ?Sized>(
    model: &M,
    context: &[TokenId],
    max_len: usize,
    seed: u64,
) -> Result<Vec<TokenId>, ModelError> {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut rng = RunRng::new(seed).sampling;
    let mut state = model.initial_state(context)?;
    let mut out = Vec::new();
    while out.len() < max_len {
        let (probs, next) = model.next_distribution(&state)?;
        let tok = sample_categorical(&probs, &mut rng)?;
        out.push(tok);
        if tok == EOS {
            break;
        }
        state = model.feed(next, tok);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
}

impl Hypothesis {
    /// Length-normalised score `logprob / len`.
    pub fn score(&self) -> f64 {
        self.logprob / self.tokens.len() as f64
    }

    pub fn is_finished(&self) -> bool {
        self.tokens.last() == Some(&EOS)
    }
}

struct Candidate<S> {
    parent: usize,
    token: TokenId,
    token_prob: f64,
    hyp: Hypothesis,
    state: S,
}

fn rank_final(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score().total_cmp(&a.score()).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search over length-normalised log-probability.
///
/// Each step expands every live beam by every token with non-zero
/// probability and keeps the best `width − finished` candidates. Candidates
/// ending in EOS are set aside as finished. The search stops once `width`
/// hypotheses are finished, no beam is live, or `max_len` is reached;
/// finished and capped hypotheses are then ranked together by score,
/// best first. Ties go to the earlier parent beam, then the more probable
/// token, then the smaller id, so `width = 1` reproduces [`greedy_decode`].
pub fn beam_search<M: StepDecoder + ?Sized>(
    model: &M,
    context: &[TokenId],
    width: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>, ModelError> {
    assert!(width >= 1, "beam width must be at least 1");
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut live: Vec<(Hypothesis, M::State)> = vec![(
        Hypothesis {
            tokens: Vec::new(),
            logprob: 0.0,
        },
        model.initial_state(context)?,
    )];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() || finished.len() >= width {
            break;
        }
        let mut candidates: Vec<Candidate<M::State>> = Vec::new();
        for (parent, (hyp, state)) in live.iter().enumerate() {
            let (probs, next) = model.next_distribution(state)?;
            for (tok, &p) in probs.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                candidates.push(Candidate {
                    parent,
                    token: tok,
                    token_prob: p,
                    hyp: Hypothesis {
                        tokens,
                        logprob: hyp.logprob + p.ln(),
                    },
                    state: next.clone(),
                });
            }
        }
        // Every candidate at this step has the same length, so ordering by
        // normalised score equals ordering by total log-probability.
        candidates.sort_by(|a, b| {
            b.hyp
                .score()
                .total_cmp(&a.hyp.score())
                .then_with(|| a.parent.cmp(&b.parent))
                .then_with(|| b.token_prob.total_cmp(&a.token_prob))
                .then_with(|| a.token.cmp(&b.token))
        });
        candidates.truncate(width - finished.len());
        live = Vec::with_capacity(candidates.len());
        for c in candidates {
            if c.token == EOS {
                finished.push(c.hyp);
            } else {
                let state = model.feed(c.state, c.token);
                live.push((c.hyp, state));
            }
        }
    }

    let mut all = finished;
    all.extend(live.into_iter().map(|(h, _)| h));
    all.sort_by(rank_final);
    all.truncate(width);
    Ok(all)
}
