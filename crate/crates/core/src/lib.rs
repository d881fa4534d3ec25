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

//! Neural dialogue generation with a semantic auxiliary loss.
//!
//! An LSTM encoder-decoder is trained on (context, response) pairs with
//! teacher-forced negative log-likelihood, optionally combined with a
//! REINFORCE term whose reward is the negative L2 distance between the
//! averaged word vectors of a sampled response and of the target. The
//! evaluation suite reports BLEU, distinct-n, the fraction of generated
//! bigrams never seen in training targets, and the word-repeat fraction.

pub mod corpus;
pub mod decoding;
pub mod embeddings;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod numcore;
pub mod objectives;
pub mod synth;
pub mod trainer;
