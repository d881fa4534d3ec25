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

//! Single-layer LSTM encoder-decoder over a shared input embedding.
//!
//! Two forward paths share the same parameters and arithmetic: a graph path
//! (differentiable, used in training) and a plain path over `Vec<f64>` used
//! for inference and decoding, which needs no tape.
//!
//! The decoder output never places mass on PAD, BOS or SEP. Those ids are
//! masked in every distribution this module produces, including the ones
//! used for teacher forcing.

mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointError, StoredParam, CHECKPOINT_FORMAT};

use crate::corpus::{TokenId, BOS, EOS, NUM_RESERVED, PAD, SEP};
use crate::embeddings::random_embedding_rows;
use crate::numcore::{
    masked_softmax, matmul_into, sample_categorical, sigmoid, Graph, NumError, ParamId, ParamStore, Tensor, Var,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("context must contain at least one token")]
    EmptyContext,
    #[error("target must contain at least one token")]
    EmptyTarget,
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: TokenId, vocab: usize },
    #[error("invalid vocabulary mask: {0}")]
    InvalidMask(String),
    #[error("invalid sampling options: {0}")]
    InvalidOptions(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embedding_size: usize,
    pub hidden_size: usize,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, embedding_size: usize, hidden_size: usize) -> Self {
        assert!(
            vocab_size > NUM_RESERVED,
            "vocabulary must hold more than the reserved tokens"
        );
        assert!(embedding_size > 0 && hidden_size > 0);
        Self {
            vocab_size,
            embedding_size,
            hidden_size,
        }
    }
}

/// Per-id "masked" flags over the vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabMask(Vec<bool>);

impl VocabMask {
    pub fn none(vocab_size: usize) -> Self {
        Self(vec![false; vocab_size])
    }

    /// Everything masked except the listed ids.
    pub fn all_except(vocab_size: usize, keep: &[TokenId]) -> Self {
        let mut m = vec![true; vocab_size];
        for &k in keep {
            m[k] = false;
        }
        Self(m)
    }

    pub fn from_ids(vocab_size: usize, masked: &[TokenId]) -> Self {
        let mut m = Self::none(vocab_size);
        for &id in masked {
            m.0[id] = true;
        }
        m
    }

    pub fn mask(&mut self, id: TokenId) {
        self.0[id] = true;
    }

    pub fn is_masked(&self, id: TokenId) -> bool {
        self.0[id]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tokens that never receive probability mass from the decoder.
pub const NEVER_EMITTED: [TokenId; 3] = [PAD, BOS, SEP];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct ParamIds {
    embedding: ParamId,
    enc_w: ParamId,
    enc_b: ParamId,
    dec_w: ParamId,
    dec_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

pub const PARAM_NAMES: [&str; 7] = [
    "embedding",
    "encoder.weight",
    "encoder.bias",
    "decoder.weight",
    "decoder.bias",
    "output.weight",
    "output.bias",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Seq2Seq {
    config: ModelConfig,
    params: ParamStore,
    ids: ParamIds,
    base_mask: VocabMask,
}

/// Recurrent state after consuming `last_token`'s predecessor; the next
/// decoder step feeds `last_token`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
    pub last_token: TokenId,
}

/// Graph-resident recurrent state.
#[derive(Clone, Copy, Debug)]
pub struct GraphState {
    pub hidden: Var,
    pub cell: Var,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOptions {
    pub max_len: usize,
    pub p_drop: f64,
}

impl SampleOptions {
    fn validate(&self) -> Result<(), ModelError> {
        if self.max_len == 0 {
            return Err(ModelError::InvalidOptions("max_len must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(ModelError::InvalidOptions(format!(
                "p_drop must lie in [0, 1), got {}",
                self.p_drop
            )));
        }
        Ok(())
    }
}

/// A sampled response with graph-connected per-step log-probabilities of
/// the post-mask distribution each token was drawn from.
#[derive(Clone, Debug)]
pub struct SampledResponse {
    pub tokens: Vec<TokenId>,
    pub logprobs: Vec<Var>,
}

impl Seq2Seq {
    /// Randomly initialised model. Draw order on `rng`: embedding rows,
    /// encoder weight, decoder weight, output weight. Biases start at zero.
    pub fn random<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Self {
        let embedding = random_embedding_rows(config.vocab_size, config.embedding_size, rng);
        Self::with_embedding(config, embedding, rng)
    }

    /// Model with a given input embedding and the remaining weights drawn
    /// from `rng` exactly as [`Seq2Seq::random`] would draw them.
    pub fn with_embedding<R: Rng + ?Sized>(config: ModelConfig, embedding: Tensor, rng: &mut R) -> Self {
        assert_eq!(embedding.shape(), [config.vocab_size, config.embedding_size]);
        let (e, h, v) = (config.embedding_size, config.hidden_size, config.vocab_size);
        let bound = 1.0 / (h as f64).sqrt();
        let mut uniform = |rows: usize, cols: usize| {
            let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
            Tensor::matrix(rows, cols, data).expect("positive dims")
        };
        let enc_w = uniform(e + h, 4 * h);
        let dec_w = uniform(e + h, 4 * h);
        let out_w = uniform(h, v);
        Self::from_tensors(
            config,
            [
                embedding,
                enc_w,
                Tensor::zeros(&[1, 4 * h]),
                dec_w,
                Tensor::zeros(&[1, 4 * h]),
                out_w,
                Tensor::zeros(&[1, v]),
            ],
        )
    }

    /// All parameters zero.
    pub fn zeros(config: ModelConfig) -> Self {
        let (e, h, v) = (config.embedding_size, config.hidden_size, config.vocab_size);
        Self::from_tensors(
            config,
            [
                Tensor::zeros(&[v, e]),
                Tensor::zeros(&[e + h, 4 * h]),
                Tensor::zeros(&[1, 4 * h]),
                Tensor::zeros(&[e + h, 4 * h]),
                Tensor::zeros(&[1, 4 * h]),
                Tensor::zeros(&[h, v]),
                Tensor::zeros(&[1, v]),
            ],
        )
    }

    fn from_tensors(config: ModelConfig, tensors: [Tensor; 7]) -> Self {
        let mut params = ParamStore::new();
        let mut ids = tensors
            .into_iter()
            .zip(PARAM_NAMES)
            .map(|(t, name)| params.insert(name, t));
        let mut next = || ids.next().expect("seven tensors");
        let ids = ParamIds {
            embedding: next(),
            enc_w: next(),
            enc_b: next(),
            dec_w: next(),
            dec_b: next(),
            out_w: next(),
            out_b: next(),
        };
        Self {
            config,
            params,
            ids,
            base_mask: VocabMask::from_ids(config.vocab_size, &NEVER_EMITTED),
        }
    }

    /// Rebuild from a parameter store with the canonical names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        let reference = Self::zeros(config);
        if params.len() != PARAM_NAMES.len() {
            return Err(ModelError::InvalidOptions(format!(
                "expected {} parameters, found {}",
                PARAM_NAMES.len(),
                params.len()
            )));
        }
        for ((id, name, t), (_, ref_name, ref_t)) in params.iter().zip(reference.params.iter()) {
            if name != ref_name || t.shape() != ref_t.shape() {
                return Err(ModelError::InvalidOptions(format!(
                    "parameter {} `{name}` {:?} does not match `{ref_name}` {:?}",
                    id.index(),
                    t.shape(),
                    ref_t.shape()
                )));
            }
        }
        Ok(Self { params, ..reference })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<(), ModelError> {
        match ids.iter().find(|&&i| i >= self.config.vocab_size) {
            Some(&id) => Err(ModelError::TokenOutOfRange {
                id,
                vocab: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    /// Permanent mask merged with `extra`; EOS may not be masked.
    pub fn effective_mask(&self, extra: Option<&VocabMask>) -> Result<VocabMask, ModelError> {
        let mut mask = self.base_mask.clone();
        if let Some(extra) = extra {
            if extra.len() != self.config.vocab_size {
                return Err(ModelError::InvalidMask(format!(
                    "mask has {} entries for vocabulary of {}",
                    extra.len(),
                    self.config.vocab_size
                )));
            }
            if extra.as_slice().iter().all(|&m| m) {
                return Err(ModelError::InvalidMask("mask covers every id".into()));
            }
            if extra.is_masked(EOS) {
                return Err(ModelError::InvalidMask("EOS cannot be masked".into()));
            }
            for (i, &m) in extra.as_slice().iter().enumerate() {
                if m {
                    mask.mask(i);
                }
            }
        }
        Ok(mask)
    }

    // ---- plain path ----

    fn lstm_step_plain(&self, w: ParamId, b: ParamId, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hs = self.config.hidden_size;
        let mut xh = Vec::with_capacity(x.len() + h.len());
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let mut z = vec![0.0; 4 * hs];
        matmul_into(&xh, self.params.get(w).data(), 1, xh.len(), 4 * hs, &mut z);
        for (zv, bv) in z.iter_mut().zip(self.params.get(b).data()) {
            *zv += bv;
        }
        let mut h_new = vec![0.0; hs];
        let mut c_new = vec![0.0; hs];
        for j in 0..hs {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[hs + j]);
            let g_g = z[2 * hs + j].tanh();
            let o_g = sigmoid(z[3 * hs + j]);
            c_new[j] = f_g * c[j] + i_g * g_g;
            h_new[j] = o_g * c_new[j].tanh();
        }
        (h_new, c_new)
    }

    fn embedding_row(&self, id: TokenId) -> &[f64] {
        self.params.get(self.ids.embedding).row_slice(id)
    }

    pub fn encode(&self, context: &[TokenId]) -> Result<DecoderState, ModelError> {
        if context.is_empty() {
            return Err(ModelError::EmptyContext);
        }
        self.check_ids(context)?;
        let hs = self.config.hidden_size;
        let (mut h, mut c) = (vec![0.0; hs], vec![0.0; hs]);
        for &tok in context {
            (h, c) = self.lstm_step_plain(self.ids.enc_w, self.ids.enc_b, self.embedding_row(tok), &h, &c);
        }
        Ok(DecoderState {
            hidden: h,
            cell: c,
            last_token: BOS,
        })
    }

    /// Unmasked output logits for the step that consumes `state.last_token`.
    pub fn step_logits(&self, state: &DecoderState) -> Result<(Vec<f64>, DecoderState), ModelError> {
        self.check_ids(&[state.last_token])?;
        let (h, c) = self.lstm_step_plain(
            self.ids.dec_w,
            self.ids.dec_b,
            self.embedding_row(state.last_token),
            &state.hidden,
            &state.cell,
        );
        let v = self.config.vocab_size;
        let mut logits = vec![0.0; v];
        matmul_into(&h, self.params.get(self.ids.out_w).data(), 1, h.len(), v, &mut logits);
        for (l, b) in logits.iter_mut().zip(self.params.get(self.ids.out_b).data()) {
            *l += b;
        }
        Ok((
            logits,
            DecoderState {
                hidden: h,
                cell: c,
                last_token: state.last_token,
            },
        ))
    }

    /// Next-token distribution and the advanced recurrent state. The returned
    /// state still carries the old `last_token`; set it to the chosen token
    /// before the next step.
    pub fn decode_step(
        &self,
        state: &DecoderState,
        mask: Option<&VocabMask>,
    ) -> Result<(Vec<f64>, DecoderState), ModelError> {
        let mask = self.effective_mask(mask)?;
        let (logits, next) = self.step_logits(state)?;
        let probs = masked_softmax(&logits, Some(mask.as_slice())).ok_or(NumError::EmptyMask)?;
        Ok((probs, next))
    }

    // ---- graph path ----

    fn lstm_step_graph(
        &self,
        g: &mut Graph<'_>,
        w: ParamId,
        b: ParamId,
        x: Var,
        state: GraphState,
    ) -> Result<GraphState, ModelError> {
        let hs = self.config.hidden_size;
        let (w, b) = (g.param(w), g.param(b));
        let xh = g.concat(x, state.hidden)?;
        let z = g.matmul(xh, w)?;
        let z = g.add(z, b)?;
        let zi = g.slice_cols(z, 0, hs)?;
        let i = g.sigmoid(zi)?;
        let zf = g.slice_cols(z, hs, 2 * hs)?;
        let f = g.sigmoid(zf)?;
        let zg = g.slice_cols(z, 2 * hs, 3 * hs)?;
        let gg = g.tanh(zg)?;
        let zo = g.slice_cols(z, 3 * hs, 4 * hs)?;
        let o = g.sigmoid(zo)?;
        let keep = g.mul(f, state.cell)?;
        let write = g.mul(i, gg)?;
        let cell = g.add(keep, write)?;
        let squashed = g.tanh(cell)?;
        let hidden = g.mul(o, squashed)?;
        Ok(GraphState { hidden, cell })
    }

    fn embed_graph(&self, g: &mut Graph<'_>, token: TokenId) -> Result<Var, ModelError> {
        let table = g.param(self.ids.embedding);
        Ok(g.embedding_gather(table, &[token])?)
    }

    pub fn encode_graph(&self, g: &mut Graph<'_>, context: &[TokenId]) -> Result<GraphState, ModelError> {
        if context.is_empty() {
            return Err(ModelError::EmptyContext);
        }
        self.check_ids(context)?;
        let hs = self.config.hidden_size;
        let mut state = GraphState {
            hidden: g.constant(Tensor::zeros(&[1, hs])),
            cell: g.constant(Tensor::zeros(&[1, hs])),
        };
        for &tok in context {
            let x = self.embed_graph(g, tok)?;
            state = self.lstm_step_graph(g, self.ids.enc_w, self.ids.enc_b, x, state)?;
        }
        Ok(state)
    }

    /// Output logits (`1 × |V|`) after feeding `token` from `state`.
    pub fn decoder_logits_graph(
        &self,
        g: &mut Graph<'_>,
        state: GraphState,
        token: TokenId,
    ) -> Result<(Var, GraphState), ModelError> {
        self.check_ids(&[token])?;
        let x = self.embed_graph(g, token)?;
        let next = self.lstm_step_graph(g, self.ids.dec_w, self.ids.dec_b, x, state)?;
        let (w, b) = (g.param(self.ids.out_w), g.param(self.ids.out_b));
        let logits = g.matmul(next.hidden, w)?;
        let logits = g.add(logits, b)?;
        Ok((logits, next))
    }

    /// Per-step `log P(target[t] | target[<t], context)` with BOS fed first.
    pub fn teacher_forced_logprobs(
        &self,
        g: &mut Graph<'_>,
        context: &[TokenId],
        target: &[TokenId],
    ) -> Result<Vec<Var>, ModelError> {
        let state = self.encode_graph(g, context)?;
        self.teacher_forced_from(g, state, target)
    }

    pub fn teacher_forced_from(
        &self,
        g: &mut Graph<'_>,
        mut state: GraphState,
        target: &[TokenId],
    ) -> Result<Vec<Var>, ModelError> {
        if target.is_empty() {
            return Err(ModelError::EmptyTarget);
        }
        self.check_ids(target)?;
        let mut prev = BOS;
        let mut out = Vec::with_capacity(target.len());
        for &tok in target {
            let (logits, next) = self.decoder_logits_graph(g, state, prev)?;
            out.push(g.log_softmax_pick(logits, Some(self.base_mask.as_slice()), tok)?);
            state = next;
            prev = tok;
        }
        Ok(out)
    }

    /// Sample a response token by token from the decoder distribution.
    ///
    /// At every step, when `p_drop > 0`, each non-reserved id is masked
    /// independently with probability `p_drop` using `masking_rng` (one
    /// uniform draw per id, in id order); the token is then drawn from the
    /// renormalised distribution using `sampling_rng`. Stops after EOS or
    /// `max_len` tokens.
    pub fn sample_response<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        mut state: GraphState,
        options: SampleOptions,
        sampling_rng: &mut R1,
        masking_rng: &mut R2,
    ) -> Result<SampledResponse, ModelError> {
        options.validate()?;
        let mut prev = BOS;
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        for _ in 0..options.max_len {
            let (logits, next) = self.decoder_logits_graph(g, state, prev)?;
            let mut mask = self.base_mask.clone();
            if options.p_drop > 0.0 {
                for id in NUM_RESERVED..self.config.vocab_size {
                    if masking_rng.random::<f64>() < options.p_drop {
                        mask.mask(id);
                    }
                }
            }
            let probs = masked_softmax(g.value(logits).data(), Some(mask.as_slice())).ok_or(NumError::EmptyMask)?;
            let tok = sample_categorical(&probs, sampling_rng)?;
            logprobs.push(g.log_softmax_pick(logits, Some(mask.as_slice()), tok)?);
            tokens.push(tok);
            if tok == EOS {
                break;
            }
            state = next;
            prev = tok;
        }
        Ok(SampledResponse { tokens, logprobs })
    }

    pub fn to_checkpoint(
        &self,
        vocab_hash: &str,
        vocab_tokens: &[String],
        config_snapshot: Vec<(String, String)>,
    ) -> Checkpoint {
        Checkpoint::from_model(self, vocab_hash, vocab_tokens, config_snapshot)
    }
}
