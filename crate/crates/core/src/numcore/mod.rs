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

//! Numerical substrate: tensors, a reverse-mode autodiff tape, a parameter
//! store, the Adam optimizer and seeded random streams.

mod adam;
mod graph;
mod params;
mod rng;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Gradients, Graph, OpKind, Var};
pub use params::{ParamGrads, ParamId, ParamStore};
pub use rng::{sample_categorical, RunRng, StreamRng};
pub use tensor::Tensor;

pub(crate) use tensor::{masked_softmax, matmul_into, sigmoid};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs a different number of elements than {len}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("dimension mismatch in {op}: input shapes {shapes:?}")]
    ShapeMismatch { op: OpKind, shapes: Vec<Vec<usize>> },
    #[error("index {index} out of range in {op} for shape {shape:?}")]
    IndexOutOfRange {
        op: OpKind,
        index: usize,
        shape: Vec<usize>,
    },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: OpKind },
    #[error("backward needs a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("target index {index} is masked")]
    MaskedTarget { index: usize },
    #[error("every entry of the distribution is masked")]
    EmptyMask,
    #[error("training diverged: non-finite gradient for parameter `{param}`")]
    Divergence { param: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("cannot sample from a distribution with no mass")]
    DegenerateDistribution,
}
