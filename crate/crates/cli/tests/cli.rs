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

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semloss::corpus::is_validation;
use semloss::trainer::CONFIG_KEYS;

fn semloss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semloss")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dialogue(id: &str, turns: &[&str]) -> String {
    let turns: Vec<String> = turns
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let who = if i % 2 == 0 { "user" } else { "agent" };
            format!(r#"{{"speaker":"{who}","text":"{t}"}}"#)
        })
        .collect();
    format!(r#"{{"dialogue_id":"{id}","turns":[{}]}}"#, turns.join(","))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// Ten single-exchange dialogues in the training split and one in validation.
fn toy_corpus(dir: &Path) -> PathBuf {
    let colours = ["red", "green", "blue", "black", "white"];
    let sizes = ["small", "large"];
    let (mut train, mut valid, mut lines) = (0, 0, Vec::new());
    let mut k = 0;
    while train < 10 || valid < 1 {
        let id = format!("toy-{k}");
        let held_out = is_validation(&id, 0.1);
        if (held_out && valid < 1) || (!held_out && train < 10) {
            let q = format!("tell me about item{k}");
            let a = format!("item{k} is {} and {}", colours[k % 5], sizes[k % 2]);
            lines.push(dialogue(&id, &[&q, &a]));
            if held_out {
                valid += 1;
            } else {
                train += 1;
            }
        }
        k += 1;
    }
    write(dir, "toy.jsonl", &(lines.join("\n") + "\n"))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn prepare_reports_hand_counted_bigrams() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = [
        dialogue("one", &["a b a b", "c d", "a b", "c d c"]),
        dialogue("two", &["a b", "c d"]),
    ]
    .join("\n");
    let corpus = write(dir.path(), "c.jsonl", &corpus);
    let out = dir.path().join("prep");
    let r = semloss(&[
        "prepare",
        "--corpus",
        p(&corpus),
        "--out-dir",
        p(&out),
        "--valid-fraction",
        "0.5",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    // Context utterances: [a b a b], [a b a b | c d | a b], [a b]
    //   bigrams ab ba ab / ab ba ab cd ab / ab: 9 total, 3 unique.
    // Targets: [c d], [c d c], [c d]: cd / cd dc / cd: 4 total, 2 unique.
    let stats = fs::read_to_string(out.join("bigram_stats.tsv")).unwrap();
    assert_eq!(
        stats,
        "segment\tunique\ttotal\taverage_occurrence\ncontext\t3\t9\t3\ntarget\t2\t4\t2\n"
    );
    for f in ["vocab.txt", "train_pairs.jsonl", "valid_pairs.jsonl", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn prepare_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert!(semloss(&["prepare", "--corpus", p(&corpus), "--out-dir", p(out)])
            .status
            .success());
    }
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = semloss(&["prepare", "--corpus", "/no/such/file.jsonl", "--out-dir", p(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("/no/such/file.jsonl"));
}

#[test]
fn invalid_config_lists_offending_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "alpha = -1\np-drop = 2\nhidden-size = 8\n");
    let r = semloss(&["train", "--config", p(&cfg), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("alpha") && err.contains("p-drop"), "{err}");
    assert!(!err.contains("hidden-size"), "{err}");

    let unknown = write(dir.path(), "unknown.cfg", "alpah = 0.1\n");
    let r = semloss(&["train", "--config", p(&unknown), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("alpah"));
}

#[test]
fn semantic_run_without_vectors_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let r = semloss(&[
        "train",
        "--corpus",
        p(&corpus),
        "--alpha",
        "0.1",
        "--out-dir",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("embedding-file"));
}

#[test]
fn unknown_flags_are_errors() {
    let r = semloss(&["train", "--out-dir", "x", "--alhpa", "0"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn train_help_documents_every_key() {
    let r = semloss(&["train", "--help"]);
    let help = String::from_utf8_lossy(&r.stdout);
    for key in CONFIG_KEYS {
        assert!(help.contains(&format!("--{key}")), "missing --{key}");
    }
    assert!(help.contains("--config") && help.contains("--sequential"));
}

fn train_toy(dir: &Path, corpus: &Path, epochs: &str, eval_every: &str) -> PathBuf {
    let out = dir.join("run");
    let r = semloss(&[
        "train",
        "--corpus",
        p(corpus),
        "--out-dir",
        p(&out),
        "--alpha",
        "0",
        "--seeds",
        "1",
        "--hidden-size",
        "32",
        "--embedding-size",
        "32",
        "--batch-size",
        "10",
        "--epochs",
        epochs,
        "--eval-every",
        eval_every,
        "--learning-rate",
        "0.01",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    out
}

#[test]
fn overfit_model_scores_high_bleu_on_its_training_set() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let run = train_toy(dir.path(), &corpus, "400", "400");
    let ck = run.join("seed-1").join("checkpoint.json");
    let csv = dir.path().join("eval.csv");
    let r = semloss(&[
        "eval",
        "--checkpoint",
        p(&ck),
        "--corpus",
        p(&corpus),
        "--split",
        "train",
        "--out",
        p(&csv),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("BLEU-4"));
    let text = fs::read_to_string(&csv).unwrap();
    let bleu: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(bleu > 0.9, "bleu {bleu}");

    for f in [
        "config.txt",
        "vocab.txt",
        "manifest.txt",
        "selection.txt",
        "metrics_mean.csv",
        "losses_seed1.csv",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }

    // Beam mode prints one line per hypothesis.
    let input = write(dir.path(), "in.txt", "tell me about item3\ntell me about item4\n");
    let r = semloss(&[
        "generate",
        "--checkpoint",
        p(&ck),
        "--input",
        p(&input),
        "--mode",
        "beam",
        "--beam-width",
        "5",
    ]);
    assert!(r.status.success());
    let out = String::from_utf8_lossy(&r.stdout);
    let ranked: Vec<&str> = out.lines().filter(|l| l.split('\t').count() == 3).collect();
    assert_eq!(ranked.len(), 10, "{out}");

    let r = semloss(&["generate", "--checkpoint", p(&ck), "--input", p(&input)]);
    let greedy = String::from_utf8_lossy(&r.stdout);
    assert_eq!(greedy.lines().count(), 2);
    assert!(greedy.lines().next().unwrap().starts_with("item3"), "{greedy}");

    // A corpus with different words gives a different vocabulary hash.
    let other = write(
        dir.path(),
        "other.jsonl",
        &dialogue("z", &["hello there", "general kenobi"]),
    );
    let r = semloss(&["eval", "--checkpoint", p(&ck), "--corpus", p(&other)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("incompatible vocabulary"));
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = train_toy(a.path(), &corpus, "5", "2");
    let rb = train_toy(b.path(), &corpus, "5", "2");
    assert_eq!(read_dir_bytes(&ra), read_dir_bytes(&rb));
}
