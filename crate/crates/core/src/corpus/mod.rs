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

//! Dialogue corpora: JSON-Lines ingestion, tokenization, vocabulary and
//! (context, target) pair assembly.
//!
//! Corpus format, one dialogue per line:
//!
//! ```json
//! {"dialogue_id": "d1", "turns": [{"speaker": "user", "text": "hi"}, {"speaker": "agent", "text": "hello"}]}
//! ```

mod bigrams;
mod tokenize;
mod vocab;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bigrams::{bigram_stats, BigramStats};
pub use tokenize::tokenize;
pub use vocab::{
    build_vocab, is_special_id, is_special_token, TokenId, Vocabulary, BOS, BOS_TOKEN, EOS, EOS_TOKEN, NUM_RESERVED,
    PAD, PAD_TOKEN, RESERVED_TOKENS, SEP, SEP_TOKEN, UNK, UNK_TOKEN,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: corpus contains no dialogues")]
    Empty(PathBuf),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { speaker, text, tokens }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Serialize, Deserialize)]
struct RawTurn {
    speaker: Speaker,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct RawDialogue {
    dialogue_id: String,
    turns: Vec<RawTurn>,
}

impl Dialogue {
    pub fn to_json_line(&self) -> String {
        let raw = RawDialogue {
            dialogue_id: self.id.clone(),
            turns: self
                .turns
                .iter()
                .map(|t| RawTurn {
                    speaker: t.speaker,
                    text: t.text.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("dialogue serializes")
    }
}

/// A turn whose speaker equals the previous turn's speaker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlternationViolation {
    pub line: usize,
    pub dialogue_id: String,
    pub turn_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dialogues: usize,
    pub turns: usize,
    pub alternation_violations: Vec<AlternationViolation>,
}

pub fn load_corpus(path: &Path) -> Result<(Vec<Dialogue>, LoadReport), CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut dialogues = Vec::new();
    let mut report = LoadReport::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDialogue = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let turns: Vec<Turn> = raw.turns.into_iter().map(|t| Turn::new(t.speaker, t.text)).collect();
        for i in 1..turns.len() {
            if turns[i].speaker == turns[i - 1].speaker {
                report.alternation_violations.push(AlternationViolation {
                    line: line_no,
                    dialogue_id: raw.dialogue_id.clone(),
                    turn_index: i,
                });
            }
        }
        report.turns += turns.len();
        dialogues.push(Dialogue {
            id: raw.dialogue_id,
            turns,
        });
    }
    if dialogues.is_empty() {
        return Err(CorpusError::Empty(path.to_path_buf()));
    }
    report.dialogues = dialogues.len();
    Ok((dialogues, report))
}

pub fn write_corpus(path: &Path, dialogues: &[Dialogue]) -> Result<(), CorpusError> {
    let mut s = String::new();
    for d in dialogues {
        s.push_str(&d.to_json_line());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| CorpusError::io(path, e))
}

/// Context tokens (history joined with SEP) and EOS-terminated target tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub dialogue_id: String,
    pub context: Vec<String>,
    pub target: Vec<String>,
}

impl TrainingPair {
    /// Target tokens without the trailing EOS.
    pub fn response(&self) -> &[String] {
        &self.target[..self.target.len() - 1]
    }

    /// Context split back into its SEP-delimited utterances.
    pub fn context_utterances(&self) -> impl Iterator<Item = &[String]> {
        self.context.split(|t| t == SEP_TOKEN)
    }
}

pub const DEFAULT_CONTEXT_CAP: usize = 256;

/// One pair per agent turn that has at least one preceding turn. The context
/// is every earlier turn joined with SEP, cut from the left to at most
/// `context_cap` tokens.
pub fn training_pairs(dialogue: &Dialogue, context_cap: usize) -> Vec<TrainingPair> {
    assert!(context_cap >= 1, "context cap must be positive");
    let mut pairs = Vec::new();
    let mut history: Vec<String> = Vec::new();
    for (i, turn) in dialogue.turns.iter().enumerate() {
        if turn.speaker == Speaker::Agent && i > 0 && !history.is_empty() {
            let start = history.len().saturating_sub(context_cap);
            let mut target = turn.tokens.clone();
            target.push(EOS_TOKEN.to_string());
            pairs.push(TrainingPair {
                dialogue_id: dialogue.id.clone(),
                context: history[start..].to_vec(),
                target,
            });
        }
        if i > 0 {
            history.push(SEP_TOKEN.to_string());
        }
        history.extend(turn.tokens.iter().cloned());
    }
    pairs
}

pub fn corpus_pairs(dialogues: &[Dialogue], context_cap: usize) -> Vec<TrainingPair> {
    dialogues.iter().flat_map(|d| training_pairs(d, context_cap)).collect()
}

/// Id-encoded pair ready for the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub context: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl EncodedPair {
    pub fn encode(pair: &TrainingPair, vocab: &Vocabulary) -> (Self, usize) {
        let (context, u1) = vocab.encode(&pair.context);
        let (target, u2) = vocab.encode(&pair.target);
        (Self { context, target }, u1 + u2)
    }
}

/// Whether a dialogue belongs to the validation split: the first eight bytes
/// of SHA-256(dialogue id), read as a big-endian integer modulo 10_000, fall
/// below `valid_fraction · 10_000`.
pub fn is_validation(dialogue_id: &str, valid_fraction: f64) -> bool {
    let digest = Sha256::digest(dialogue_id.as_bytes());
    let mut prefix = [0u8; 8];
    prefix.copy_from_slice(&digest[..8]);
    let bucket = u64::from_be_bytes(prefix) % 10_000;
    (bucket as f64) < valid_fraction * 10_000.0
}

/// Deterministic (train, validation) split by dialogue id hash.
pub fn split_dialogues(dialogues: &[Dialogue], valid_fraction: f64) -> (Vec<Dialogue>, Vec<Dialogue>) {
    dialogues
        .iter()
        .cloned()
        .partition(|d| !is_validation(&d.id, valid_fraction))
}

pub fn write_pairs(path: &Path, pairs: &[TrainingPair]) -> Result<(), CorpusError> {
    let mut s = String::new();
    for p in pairs {
        s.push_str(&serde_json::to_string(p).expect("pair serializes"));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| CorpusError::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<TrainingPair>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn dialogue(turns: &[(Speaker, &str)]) -> Dialogue {
        Dialogue {
            id: "d0".into(),
            turns: turns.iter().map(|&(s, t)| Turn::new(s, t)).collect(),
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_exchange_gives_one_pair() {
        let f = write_tmp(
            r#"{"dialogue_id": "x", "turns": [{"speaker": "user", "text": "Hi there"}, {"speaker": "agent", "text": "Hello!"}]}"#,
        );
        let (ds, report) = load_corpus(f.path()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(report.turns, 2);
        assert!(report.alternation_violations.is_empty());
        let pairs = training_pairs(&ds[0], DEFAULT_CONTEXT_CAP);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].context, ["hi", "there"]);
        assert_eq!(pairs[0].target, ["hello", "!", EOS_TOKEN]);
    }

    #[test]
    fn contexts_grow_with_each_agent_turn() {
        use Speaker::*;
        let d = dialogue(&[
            (User, "a"),
            (Agent, "b"),
            (User, "c"),
            (Agent, "d"),
            (User, "e"),
            (Agent, "f"),
        ]);
        let pairs = training_pairs(&d, DEFAULT_CONTEXT_CAP);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].context, ["a"]);
        assert_eq!(pairs[1].context, ["a", SEP_TOKEN, "b", SEP_TOKEN, "c"]);
        assert_eq!(
            pairs[2].context,
            ["a", SEP_TOKEN, "b", SEP_TOKEN, "c", SEP_TOKEN, "d", SEP_TOKEN, "e"]
        );
        for w in pairs.windows(2) {
            assert!(w[1].context.len() > w[0].context.len());
            assert!(w[1].context.starts_with(&w[0].context));
        }
        for p in &pairs {
            assert_eq!(p.target.iter().filter(|t| *t == EOS_TOKEN).count(), 1);
            assert_eq!(p.target.last().unwrap(), EOS_TOKEN);
        }
    }

    #[test]
    fn context_is_truncated_from_the_left() {
        use Speaker::*;
        let d = dialogue(&[(User, "one two three"), (Agent, "x"), (User, "four five"), (Agent, "y")]);
        let pairs = training_pairs(&d, 4);
        assert_eq!(pairs[1].context, ["x", SEP_TOKEN, "four", "five"]);
    }

    #[test]
    fn leading_agent_turn_is_skipped_and_violations_flagged() {
        let f = write_tmp(
            r#"{"dialogue_id": "x", "turns": [{"speaker": "agent", "text": "welcome"}, {"speaker": "agent", "text": "anyone?"}]}"#,
        );
        let (ds, report) = load_corpus(f.path()).unwrap();
        assert_eq!(report.alternation_violations.len(), 1);
        assert_eq!(report.alternation_violations[0].turn_index, 1);
        let pairs = training_pairs(&ds[0], 10);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].context, ["welcome"]);
    }

    #[test]
    fn bad_json_line_reports_line_number() {
        let mut text = String::new();
        for i in 0..6 {
            text.push_str(&format!(
                "{{\"dialogue_id\": \"d{i}\", \"turns\": [{{\"speaker\": \"user\", \"text\": \"a\"}}]}}\n"
            ));
        }
        text.push_str("{not json}\n");
        let f = write_tmp(&text);
        match load_corpus(f.path()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_tmp("\n\n");
        assert!(matches!(load_corpus(f.path()), Err(CorpusError::Empty(_))));
    }

    #[test]
    fn encoding_round_trips_modulo_unk() {
        use Speaker::*;
        let d = dialogue(&[
            (User, "book a flight"),
            (Agent, "to where ?"),
            (User, "rome"),
            (Agent, "ok"),
        ]);
        let pairs = training_pairs(&d, 256);
        let vocab = build_vocab(&pairs[..1], 1);
        for p in &pairs {
            let (enc, unk) = EncodedPair::encode(p, &vocab);
            let decoded = vocab.decode(&enc.context);
            let mismatches = decoded.iter().zip(&p.context).filter(|(a, b)| a != b).count();
            let (_, ctx_unk) = vocab.encode(&p.context);
            assert_eq!(mismatches, ctx_unk);
            assert!(unk >= ctx_unk);
        }
    }

    #[test]
    fn split_is_deterministic_and_roughly_proportional() {
        let ds: Vec<Dialogue> = (0..1000)
            .map(|i| Dialogue {
                id: format!("dlg-{i}"),
                turns: vec![],
            })
            .collect();
        let (train, valid) = split_dialogues(&ds, 0.1);
        assert_eq!(train.len() + valid.len(), 1000);
        assert!((60..140).contains(&valid.len()), "{}", valid.len());
        let (train2, _) = split_dialogues(&ds, 0.1);
        assert_eq!(train, train2);
    }
}
