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

//! JSON checkpoint container.
//!
//! ```json
//! {
//!   "format": "semloss-checkpoint-v1",
//!   "model": {"vocab_size": 300, "embedding_size": 128, "hidden_size": 128},
//!   "vocab_hash": "<sha256 of the vocabulary file>",
//!   "vocab": ["<pad>", "<unk>", ...],
//!   "config": [["alpha", "0.1"], ...],
//!   "params": [{"name": "embedding", "shape": [300, 128], "data": [...]}, ...]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save → load → save
//! reproduces the file byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelConfig, ModelError, Seq2Seq};
use crate::numcore::{ParamStore, Tensor};

pub const CHECKPOINT_FORMAT: &str = "semloss-checkpoint-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelConfig,
    pub vocab_hash: String,
    pub vocab: Vec<String>,
    pub config: Vec<(String, String)>,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model(
        model: &Seq2Seq,
        vocab_hash: &str,
        vocab_tokens: &[String],
        config: Vec<(String, String)>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            model: model.config(),
            vocab_hash: vocab_hash.to_string(),
            vocab: vocab_tokens.to_vec(),
            config,
            params: model
                .params()
                .iter()
                .map(|(_, name, t)| StoredParam {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<Seq2Seq, CheckpointError> {
        let mut store = ParamStore::new();
        for p in &self.params {
            let t = Tensor::new(p.shape.clone(), p.data.clone())
                .map_err(|e| CheckpointError::Malformed(format!("{}: {e}", p.name)))?;
            store.insert(p.name.clone(), t);
        }
        Ok(Seq2Seq::from_params(self.model, store)?)
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Malformed(format!("unknown format {:?}", ck.format)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
