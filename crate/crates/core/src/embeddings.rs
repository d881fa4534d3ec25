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

//! Static word-vector tables, averaged sentence embeddings and the L2
//! semantic distance between two token sequences.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::corpus::{is_special_token, Vocabulary};
use crate::numcore::Tensor;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: no embedding vectors found")]
    Empty(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Insert a vector; panics if its length differs from the table dimension.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length must equal table dimension");
        assert!(vector.iter().all(|v| v.is_finite()), "embedding entries must be finite");
        self.vectors.insert(token.into(), vector);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Text in the word2vec/GloVe format, tokens sorted.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        let mut s = String::new();
        for k in keys {
            s.push_str(k);
            for v in &self.vectors[k] {
                s.push(' ');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }
}

/// Load a "token v1 … vd" text table. A first line made of exactly two
/// integers is taken as a "count dim" header and skipped. With `filter`,
/// only tokens present in that vocabulary are kept. The first occurrence of
/// a repeated token wins.
pub fn load_embeddings(path: &Path, filter: Option<&Vocabulary>) -> Result<EmbeddingTable, EmbeddingError> {
    let file = std::fs::File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |line: usize, message: String| EmbeddingError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dim: Option<usize> = None;
    let mut vectors = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if line_no == 1 && rest.len() == 1 && token.parse::<u64>().is_ok() && rest[0].parse::<u64>().is_ok() {
            continue;
        }
        if rest.is_empty() {
            return Err(format_err(line_no, format!("token {token:?} has no vector")));
        }
        match dim {
            None => dim = Some(rest.len()),
            Some(d) if d != rest.len() => {
                return Err(format_err(
                    line_no,
                    format!("expected {d} values, found {}", rest.len()),
                ))
            }
            Some(_) => {}
        }
        if filter.is_some_and(|v| v.get(token).is_none()) || vectors.contains_key(token) {
            continue;
        }
        let mut vector = Vec::with_capacity(rest.len());
        for f in rest {
            let v: f64 = f
                .parse()
                .map_err(|_| format_err(line_no, format!("cannot parse {f:?} as a number")))?;
            if !v.is_finite() {
                return Err(format_err(line_no, format!("non-finite value {f:?}")));
            }
            vector.push(v);
        }
        vectors.insert(token.to_string(), vector);
    }
    let dim = dim.ok_or_else(|| EmbeddingError::Empty(path.to_path_buf()))?;
    Ok(EmbeddingTable { dim, vectors })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    /// Tokens found in the table.
    pub covered: usize,
    /// Non-special tokens considered.
    pub total: usize,
    /// Special tokens skipped.
    pub special: usize,
}

impl SentenceEmbedding {
    pub fn is_degenerate(&self) -> bool {
        self.covered == 0
    }
}

/// Mean word vector of the in-table, non-special tokens. Vectors are summed
/// per distinct token in lexicographic order, so the result depends only on
/// the token multiset.
pub fn sentence_embedding<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> SentenceEmbedding {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut special = 0;
    let mut total = 0;
    for t in tokens {
        let t = t.as_ref();
        if is_special_token(t) {
            special += 1;
            continue;
        }
        total += 1;
        if table.get(t).is_some() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut vector = vec![0.0; table.dim()];
    let mut covered = 0;
    for (token, count) in counts {
        let v = table.get(token).expect("filtered above");
        let c = count as f64;
        for (acc, x) in vector.iter_mut().zip(v) {
            *acc += c * x;
        }
        covered += count;
    }
    if covered > 0 {
        let n = covered as f64;
        for acc in &mut vector {
            *acc /= n;
        }
    }
    SentenceEmbedding {
        vector,
        covered,
        total,
        special,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceDetail {
    pub distance: f64,
    pub sampled: SentenceEmbedding,
    pub target: SentenceEmbedding,
}

impl DistanceDetail {
    /// True when either side had no in-table tokens.
    pub fn is_degenerate(&self) -> bool {
        self.sampled.is_degenerate() || self.target.is_degenerate()
    }
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖mean(sampled) − mean(target)‖₂` over averaged word vectors.
pub fn semantic_distance<S: AsRef<str>, T: AsRef<str>>(sampled: &[S], target: &[T], table: &EmbeddingTable) -> f64 {
    semantic_distance_detail(sampled, target, table).distance
}

pub fn semantic_distance_detail<S: AsRef<str>, T: AsRef<str>>(
    sampled: &[S],
    target: &[T],
    table: &EmbeddingTable,
) -> DistanceDetail {
    let sampled = sentence_embedding(sampled, table);
    let target = sentence_embedding(target, table);
    DistanceDetail {
        distance: l2_distance(&sampled.vector, &target.vector),
        sampled,
        target,
    }
}

/// Standard deviation of randomly initialised input embedding entries.
pub const EMBEDDING_INIT_STD: f64 = 1.0;

/// `rows × width` matrix with i.i.d. `N(0, EMBEDDING_INIT_STD²)` entries,
/// drawn row-major.
pub fn random_embedding_rows<R: Rng + ?Sized>(rows: usize, width: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * width)
        .map(|_| EMBEDDING_INIT_STD * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Tensor::matrix(rows, width, data).expect("positive dims")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageReport {
    /// Non-special vocabulary entries found in the table.
    pub covered: usize,
    /// Non-special vocabulary entries.
    pub total: usize,
    pub projected: bool,
}

/// Input embedding matrix (`|V| × model_dim`) seeded from a word-vector table.
///
/// Every row is first drawn from the random init distribution using
/// `init_rng`, exactly as a randomly initialised model would. Rows of
/// non-special tokens present in the table are then overwritten: with the
/// table vector when `table.dim() == model_dim`, otherwise with `P·v` where
/// `P` is a `model_dim × dim` matrix of `N(0, 1/dim)` entries drawn from
/// `projection_rng`.
pub fn init_input_embeddings<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    model_dim: usize,
    init_rng: &mut R1,
    projection_rng: &mut R2,
) -> (Tensor, CoverageReport) {
    let mut matrix = random_embedding_rows(vocab.len(), model_dim, init_rng);
    let d = table.dim();
    let projection: Option<Vec<f64>> = (d != model_dim).then(|| {
        let scale = 1.0 / (d as f64).sqrt();
        (0..model_dim * d)
            .map(|_| scale * projection_rng.sample::<f64, _>(StandardNormal))
            .collect()
    });
    let mut covered = 0;
    let mut total = 0;
    for (id, token) in vocab.tokens().iter().enumerate() {
        if is_special_token(token) {
            continue;
        }
        total += 1;
        let Some(v) = table.get(token) else { continue };
        covered += 1;
        let row = &mut matrix.data_mut()[id * model_dim..(id + 1) * model_dim];
        match &projection {
            None => row.copy_from_slice(v),
            Some(p) => {
                for (r, out) in row.iter_mut().enumerate() {
                    *out = p[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
    (
        matrix,
        CoverageReport {
            covered,
            total,
            projected: projection.is_some(),
        },
    )
}
