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

//! Seeded random streams.
//!
//! Every run owns ChaCha8 generators that share one key (derived from
//! the run seed with `SeedableRng::seed_from_u64`) and differ only in their
//! ChaCha stream id:
//!
//! | stream     | id | consumers                                   |
//! |------------|----|---------------------------------------------|
//! | `init`     | 0  | parameter init                              |
//! | `sampling` | 1  | response sampling for the semantic loss     |
//! | `masking`  | 2  | vocabulary dropout before sampling          |
//! | `data`     | 3  | batch shuffling                             |
//! | projection | 4  | table-to-model embedding projection         |
//!
//! Distinct stream ids give non-overlapping keystreams, so drawing from one
//! stream never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NumError;

pub type StreamRng = ChaCha8Rng;

const INIT_STREAM: u64 = 0;
const SAMPLING_STREAM: u64 = 1;
const MASKING_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;
const PROJECTION_STREAM: u64 = 4;

#[derive(Clone, Debug)]
pub struct RunRng {
    pub seed: u64,
    pub init: StreamRng,
    pub sampling: StreamRng,
    pub masking: StreamRng,
    pub data: StreamRng,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            init: Self::stream(seed, INIT_STREAM),
            sampling: Self::stream(seed, SAMPLING_STREAM),
            masking: Self::stream(seed, MASKING_STREAM),
            data: Self::stream(seed, DATA_STREAM),
        }
    }

    /// Generator for the fixed projection used when a word-vector table's
    /// width differs from the model's embedding width. Kept apart from
    /// `init` so loading a table never shifts the remaining init draws.
    pub fn projection(seed: u64) -> StreamRng {
        Self::stream(seed, PROJECTION_STREAM)
    }

    pub fn stream(seed: u64, id: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        rng
    }
}

/// Draw an index with probability `probs[i]` by inverting the CDF with one
/// uniform draw from `rng`.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize, NumError> {
    if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(NumError::InvalidDistribution(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if total == 0.0 {
        return Err(NumError::DegenerateDistribution);
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(NumError::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if u < cumulative {
                return Ok(i);
            }
        }
    }
    // u landed in the rounding gap above the final cumulative sum.
    Ok(last_positive)
}
