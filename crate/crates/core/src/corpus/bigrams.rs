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

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Multiset of within-sentence bigrams.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigramStats {
    counts: BTreeMap<(String, String), u64>,
    total: u64,
}

impl BigramStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sentence<S: AsRef<str>>(&mut self, tokens: &[S]) {
        for w in tokens.windows(2) {
            let key = (w[0].as_ref().to_string(), w[1].as_ref().to_string());
            *self.counts.entry(key).or_default() += 1;
            self.total += 1;
        }
    }

    pub fn merge(&mut self, other: &BigramStats) {
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unique(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn count(&self, first: &str, second: &str) -> u64 {
        self.counts
            .get(&(first.to_string(), second.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn contains(&self, first: &str, second: &str) -> bool {
        self.count(first, second) > 0
    }

    /// Mean number of occurrences per distinct bigram; 0 for an empty set.
    pub fn average_occurrence(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            self.total as f64 / self.counts.len() as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), u64)> {
        self.counts.iter().map(|(k, &c)| (k, c))
    }
}

/// Bigram statistics over independent sentences; no bigram spans two
/// sentences.
pub fn bigram_stats<I, S>(sentences: I) -> BigramStats
where
    I: IntoIterator,
    I::Item: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut stats = BigramStats::new();
    for s in sentences {
        stats.add_sentence(s.as_ref());
    }
    stats
}
