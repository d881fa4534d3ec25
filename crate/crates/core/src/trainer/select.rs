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

use std::fmt;
use std::str::FromStr;

use super::{RunRecord, TrainError};

/// Fraction of a run's own maximum distinct-2 that counts as saturated.
pub const SATURATION_LEVEL: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionCriterion {
    /// Highest final BLEU, ties to the earlier record.
    BestBleu,
    /// Earliest step at which distinct-2 reaches 98% of the run's own
    /// maximum, ties to the earlier record.
    Distinct2EarlySaturation,
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionCriterion::BestBleu => "best-bleu",
            SelectionCriterion::Distinct2EarlySaturation => "distinct2-early-saturation",
        })
    }
}

impl FromStr for SelectionCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best-bleu" => Ok(Self::BestBleu),
            "distinct2-early-saturation" => Ok(Self::Distinct2EarlySaturation),
            other => Err(format!(
                "unknown criterion `{other}` (expected best-bleu or distinct2-early-saturation)"
            )),
        }
    }
}

/// Step at which `series` first reaches [`SATURATION_LEVEL`] of its maximum.
pub fn saturation_step(series: &[(u64, f64)]) -> Option<u64> {
    let max = series.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    series
        .iter()
        .find(|&&(_, v)| v >= SATURATION_LEVEL * max)
        .map(|&(s, _)| s)
}

/// Index of the chosen record. Records without evaluations never win.
pub fn select_run(records: &[RunRecord], criterion: SelectionCriterion) -> Result<usize, TrainError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        let key = match criterion {
            SelectionCriterion::BestBleu => r.final_metrics().map(|m| m.bleu),
            SelectionCriterion::Distinct2EarlySaturation => {
                let series: Vec<(u64, f64)> = r.metrics.iter().map(|(s, m)| (*s, m.distinct2())).collect();
                // Earlier is better; negate so larger wins.
                saturation_step(&series).map(|s| -(s as f64))
            }
        };
        if let Some(k) = key {
            if best.is_none_or(|(_, b)| k > b) {
                best = Some((i, k));
            }
        }
    }
    best.map(|(i, _)| i).ok_or(TrainError::NoRecords)
}
