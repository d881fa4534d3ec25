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

//! Acceptance gate. Prints one PASS/FAIL line per criterion. The process
//! exits 0 regardless so the workspace test run stays usable; set
//! `SEMLOSS_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semloss::corpus::{load_corpus, BigramStats, EncodedPair, TokenId, Vocabulary, SEP};
use semloss::decoding::{beam_search, greedy_decode};
use semloss::embeddings::{load_embeddings, semantic_distance, EmbeddingTable};
use semloss::exec::Execution;
use semloss::metrics::{
    bleu, bleu_stats, distinct_n_counts, target_bigrams, unseen_bigram_counts, word_repeat_counts, Ratio,
};
use semloss::model::{Checkpoint, ModelConfig, SampleOptions, Seq2Seq};
use semloss::numcore::{AdamConfig, AdamState, Graph, ParamGrads, RunRng};
use semloss::objectives::{semantic_loss, RewardBaseline};
use semloss::trainer::{batch_gradients, train_run, train_seeds, Dataset, RunOptions, RunRecord, TrainingConfig};

type Outcome = Result<String, String>;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn within(budget: Duration, start: Instant) -> Result<String, String> {
    let took = start.elapsed();
    let msg = format!("{:.1} s of {} s", took.as_secs_f64(), budget.as_secs());
    if took <= budget {
        Ok(msg)
    } else {
        Err(format!("over time budget: {msg}"))
    }
}

// ---------------------------------------------------------------------------
// AC1

fn ac1() -> Outcome {
    let start = Instant::now();
    let vocab = Vocabulary::from_tokens(["x", "y", "z"]).unwrap();
    if vocab.len() != 8 {
        return Err(format!("vocabulary has {} entries", vocab.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let model = Seq2Seq::random(ModelConfig::new(8, 4, 4), &mut rng);
    let mut table = EmbeddingTable::new(5);
    for w in ["x", "y", "z"] {
        table.insert(w, (0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let pairs = [
        EncodedPair {
            context: vec![5, 6, 4, 7],
            target: vec![7, 5, 3],
        },
        EncodedPair {
            context: vec![6],
            target: vec![6, 3],
        },
        EncodedPair {
            context: vec![7, 7],
            target: vec![5, 6, 7, 3],
        },
    ];
    let batch: Vec<&EncodedPair> = pairs.iter().collect();
    let cfg = TrainingConfig {
        alpha: 0.1,
        max_len: 6,
        embedding_file: Some("table".into()),
        ..TrainingConfig::default()
    };
    // Streams and baseline are cloned per evaluation so every perturbed
    // model sees the same sampling draws.
    let baseline = RewardBaseline::with_rewards(cfg.baseline_window, &[-0.8, -0.5]);
    let rng = RunRng::new(4);
    let eval = |m: &Seq2Seq| {
        batch_gradients(
            m,
            &batch,
            &cfg,
            &vocab,
            Some(&table),
            &mut baseline.clone(),
            &mut rng.clone(),
            Execution::Sequential,
        )
        .unwrap()
    };
    let (analytic, breakdown) = eval(&model);
    if breakdown.sem_loss == 0.0 {
        return Err("semantic term vanished; check is vacuous".into());
    }
    let h = 1e-5;
    let (mut worst, mut count) = (0.0f64, 0usize);
    for id in model.params().ids() {
        for k in 0..model.params().get(id).len() {
            let mut up = model.clone();
            up.params_mut().get_mut(id).data_mut()[k] += h;
            let mut down = model.clone();
            down.params_mut().get_mut(id).data_mut()[k] -= h;
            let numeric = (eval(&up).1.total - eval(&down).1.total) / (2.0 * h);
            let a = analytic.get(id).data()[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7));
            count += 1;
        }
    }
    let time = within(Duration::from_secs(10), start)?;
    let msg = format!("{count} parameters, worst relative error {worst:.2e}, {time}");
    if worst < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// AC2

fn ac2() -> Outcome {
    let start = Instant::now();
    // PAD, BOS and SEP are never sampled, leaving UNK, EOS and `w`.
    let vocab = Vocabulary::from_tokens(["w"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let model = Seq2Seq::random(ModelConfig::new(vocab.len(), 3, 3), &mut rng);
    let mask = model.effective_mask(None).unwrap();
    let support: Vec<TokenId> = (0..vocab.len()).filter(|&t| !mask.is_masked(t)).collect();
    if support.len() != 3 {
        return Err(format!("support {support:?}"));
    }
    let mut table = EmbeddingTable::new(4);
    table.insert("w", vec![0.9, -0.3, 0.4, 0.1]);
    table.insert("v", vec![-0.2, 0.7, 0.1, -0.6]);
    let target = vec!["w".to_string(), "v".to_string()];
    let context = [5];

    let grad_of = |g: &Graph<'_>, root| {
        let back = g.backward(root).unwrap();
        let mut acc = ParamGrads::zeros_like(model.params());
        g.accumulate_param_grads(&back, &mut acc);
        acc.flatten()
    };
    // Exact: Σ_y p(y) r(y) and Σ_y p(y) ∇log p(y) · r(y) etc.
    let mut outcomes = Vec::new();
    for &y in &support {
        let mut g = Graph::with_params(model.params());
        let st = model.encode_graph(&mut g, &context).unwrap();
        let lp = model.teacher_forced_from(&mut g, st, &[y]).unwrap()[0];
        let p = g.value(lp).item().exp();
        let r = -semantic_distance(&[vocab.token(y)], &target, &table);
        outcomes.push((p, r, grad_of(&g, lp)));
    }
    let total_p: f64 = outcomes.iter().map(|o| o.0).sum();
    let mean_reward: f64 = outcomes.iter().map(|o| o.0 * o.1).sum();
    let n = 100_000;
    let mut lines = Vec::new();
    let mut ok = (total_p - 1.0).abs() < 1e-12;
    for (name, b) in [("b=0", 0.0), ("b=E[r]", mean_reward)] {
        let dim = outcomes[0].2.len();
        let mut exact = vec![0.0; dim];
        for (p, r, grad) in &outcomes {
            for (e, d) in exact.iter_mut().zip(grad) {
                *e += p * -(r - b) * d;
            }
        }
        let mut sampling = ChaCha8Rng::seed_from_u64(1000);
        let mut masking = ChaCha8Rng::seed_from_u64(2000);
        let mut mc = vec![0.0; dim];
        let opts = SampleOptions {
            max_len: 1,
            p_drop: 0.0,
        };
        for _ in 0..n {
            let mut g = Graph::with_params(model.params());
            let st = model.encode_graph(&mut g, &context).unwrap();
            let s = model
                .sample_response(&mut g, st, opts, &mut sampling, &mut masking)
                .unwrap();
            let toks = vocab.decode(&s.tokens);
            let mut baseline = RewardBaseline::with_rewards(1, &[b]);
            let term = semantic_loss(&mut g, &s.logprobs, &toks, &target, &table, &mut baseline).unwrap();
            for (m, d) in mc.iter_mut().zip(grad_of(&g, term.loss)) {
                *m += d;
            }
        }
        let worst = mc
            .iter()
            .zip(&exact)
            .map(|(m, e)| (m / n as f64 - e).abs())
            .fold(0.0, f64::max);
        ok &= worst < 1e-2;
        lines.push(format!("{name}: max |mc - exact| {worst:.2e}"));
    }
    let time = within(Duration::from_secs(60), start)?;
    let msg = format!("{} over {} coordinates, {time}", lines.join(", "), outcomes[0].2.len());
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------------------
// AC3

fn synth_subset(dialogues: usize) -> (Vec<semloss::corpus::Dialogue>, EmbeddingTable) {
    let (all, _) = load_corpus(&data_dir().join("corpus.jsonl")).unwrap();
    let table = load_embeddings(&data_dir().join("embeddings.txt"), None).unwrap();
    (all.into_iter().take(dialogues).collect(), table)
}

fn nll_only_trace(cfg: &TrainingConfig, data: &Dataset, seed: u64) -> Vec<f64> {
    let mut rng = RunRng::new(seed);
    let mut model = Seq2Seq::random(
        ModelConfig::new(data.vocab.len(), cfg.embedding_size, cfg.hidden_size),
        &mut rng.init,
    );
    let mut adam = AdamState::new(
        model.params(),
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut trace = Vec::new();
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.train_encoded.len()).collect();
        order.shuffle(&mut rng.data);
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = ParamGrads::zeros_like(model.params());
            let mut loss = 0.0;
            for &i in chunk {
                let p = &data.train_encoded[i];
                let mut g = Graph::with_params(model.params());
                let lps = model.teacher_forced_logprobs(&mut g, &p.context, &p.target).unwrap();
                let s = g.add_many(&lps).unwrap();
                let nll = g.scale(s, -1.0).unwrap();
                let root = g.scale(nll, 1.0 / chunk.len() as f64).unwrap();
                loss += g.value(root).item();
                let back = g.backward(root).unwrap();
                let mut acc = ParamGrads::zeros_like(model.params());
                g.accumulate_param_grads(&back, &mut acc);
                grads.accumulate(&acc);
            }
            adam.step(model.params_mut(), &grads).unwrap();
            trace.push(loss);
        }
    }
    trace
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let (dialogues, table) = synth_subset(60);
    let cfg = TrainingConfig {
        alpha: 0.0,
        hidden_size: 16,
        embedding_size: 16,
        context_cap: 48,
        epochs: 2,
        eval_every: 1000,
        max_len: 12,
        ..TrainingConfig::default()
    };
    let data = Dataset::from_dialogues(&dialogues, &cfg);
    let trace = |c: &TrainingConfig, t: Option<&EmbeddingTable>| -> Vec<f64> {
        let out = train_run(c, &data, t, 9, &RunOptions::default()).unwrap();
        out.record.losses.iter().map(|(_, b)| b.mle_loss).collect()
    };
    let plain = trace(&cfg, None);
    let reference = nll_only_trace(&cfg, &data, 9);
    // Sampling-side settings must not leak into an α = 0 run.
    let noisy = TrainingConfig {
        p_drop: 0.5,
        baseline_window: 2,
        embedding_file: Some("vectors".into()),
        ..cfg.clone()
    };
    let with_table = trace(&noisy, Some(&table));
    let time = within(Duration::from_secs(30), start)?;
    let msg = format!("{} steps compared, {time}", plain.len());
    if plain.is_empty() {
        Err("empty trace".into())
    } else if plain != reference {
        Err(format!("trace differs from NLL-only path; {msg}"))
    } else if plain != with_table {
        Err(format!("sampling settings changed an α = 0 trace; {msg}"))
    } else {
        Ok(msg)
    }
}

// ---------------------------------------------------------------------------
// AC4 and AC9 share the random corpus generator.

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let words = ["a", "b", "c", "d", "e", "f", "<eos>", "<unk>"];
    let n = rng.random_range(1..12);
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..9);
            (0..len)
                .map(|_| words[rng.random_range(0..words.len())].to_string())
                .collect()
        })
        .collect()
}

fn real(r: &[String]) -> Vec<&str> {
    r.iter().map(String::as_str).filter(|t| !t.starts_with('<')).collect()
}

fn brute_grams(c: &[Vec<String>], n: usize) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    for r in c {
        let t = real(r);
        let mut i = 0;
        while i + n <= t.len() {
            out.push(t[i..i + n].to_vec());
            i += 1;
        }
    }
    out
}

fn brute_unique<T: PartialEq + Clone>(items: &[T]) -> Vec<T> {
    let mut u: Vec<T> = Vec::new();
    for x in items {
        if !u.contains(x) {
            u.push(x.clone());
        }
    }
    u
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for trial in 0..20 {
        let gen = random_corpus(&mut rng);
        let train = random_corpus(&mut rng);
        for n in 1..=2 {
            let grams = brute_grams(&gen, n);
            let want = Ratio::new(brute_unique(&grams).len() as u64, grams.len() as u64);
            if distinct_n_counts(&gen, n).unwrap() != want {
                return Err(format!("corpus {trial}: distinct-{n}"));
            }
        }
        let gen2 = brute_grams(&gen, 2);
        let train2 = brute_grams(&train, 2);
        let unseen = gen2.iter().filter(|g| !train2.contains(g)).count() as u64;
        let stats = target_bigrams(&train);
        if unseen_bigram_counts(&gen, &stats) != Ratio::new(unseen, gen2.len() as u64) {
            return Err(format!("corpus {trial}: unseen bigrams"));
        }
        let repeats = gen2.iter().filter(|g| g[0] == g[1]).count() as u64;
        if word_repeat_counts(&gen) != Ratio::new(repeats, gen2.len() as u64) {
            return Err(format!("corpus {trial}: word repeat"));
        }
        let uniq = brute_unique(&train2);
        if stats.unique() != uniq.len() as u64 || stats.total() != train2.len() as u64 {
            return Err(format!("corpus {trial}: bigram unique/total"));
        }
        for g in &uniq {
            let c = train2.iter().filter(|x| *x == g).count() as u64;
            if stats.count(g[0], g[1]) != c {
                return Err(format!("corpus {trial}: bigram count {g:?}"));
            }
        }
    }
    let s = |t: &str| -> Vec<String> { t.split(' ').map(str::to_string).collect() };
    let refs = vec![s("the cat sat on the mat"), s("a dog ran far away now")];
    if bleu(&refs, &refs).unwrap() != 1.0 {
        return Err("BLEU of identical corpora is not 1".into());
    }
    let p1 = bleu_stats(&[s("the the the")], &[s("the cat")]).unwrap().precisions()[0];
    if p1 != 1.0 / 3.0 {
        return Err(format!("clipped unigram precision {p1}"));
    }
    Ok("20 corpora match brute force exactly; BLEU identity 1.0; clipped unigram precision 1/3".into())
}

// ---------------------------------------------------------------------------
// AC5

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let words: Vec<String> = (0..25).map(|i| format!("w{i}")).collect();
    let mut table = EmbeddingTable::new(10);
    for w in &words[..20] {
        table.insert(w.clone(), (0..10).map(|_| rng.random_range(-2.0..2.0)).collect());
    }
    // w20..w24 are out of table; specials are skipped.
    let mut pool: Vec<String> = words.clone();
    pool.extend(["<eos>", "<unk>"].map(String::from));
    let sentence = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let len = rng.random_range(1..10);
        let mut s: Vec<String> = (0..len)
            .map(|_| pool[rng.random_range(0..pool.len())].clone())
            .collect();
        // Keep one in-table token so no side is degenerate.
        s.push(words[rng.random_range(0..20)].clone());
        s
    };
    let mut worst_triangle = f64::NEG_INFINITY;
    for i in 0..1000 {
        let a = sentence(&mut rng);
        let b = sentence(&mut rng);
        let c = sentence(&mut rng);
        let d = |x: &[String], y: &[String]| semantic_distance(x, y, &table);
        let ab = d(&a, &b);
        if ab != d(&b, &a) {
            return Err(format!("pair {i}: asymmetric"));
        }
        if ab.is_nan() || ab < 0.0 {
            return Err(format!("pair {i}: negative or NaN {ab}"));
        }
        let slack = d(&a, &c) - (ab + d(&b, &c));
        worst_triangle = worst_triangle.max(slack);
        if slack > 1e-12 {
            return Err(format!("pair {i}: triangle violated by {slack:e}"));
        }
        let mut shuffled = a.clone();
        shuffled.shuffle(&mut rng);
        if d(&a, &shuffled) != 0.0 {
            return Err(format!("pair {i}: equal multisets at distance {}", d(&a, &shuffled)));
        }
        if d(&shuffled, &b) != ab {
            return Err(format!("pair {i}: order dependence"));
        }
    }
    Ok(format!("1000 triples; max triangle slack {worst_triangle:.2e}"))
}

// ---------------------------------------------------------------------------
// AC6 and AC7 share the synthetic-corpus runs.

const EXPERIMENT_EPOCHS: usize = 15;
const EXPERIMENT_SEEDS: [u64; 3] = [1, 2, 3];

struct Experiment {
    data: Dataset,
    table: EmbeddingTable,
    base: TrainingConfig,
}

impl Experiment {
    fn load() -> Self {
        let (dialogues, _) = load_corpus(&data_dir().join("corpus.jsonl")).unwrap();
        let base = TrainingConfig {
            hidden_size: 32,
            embedding_size: 32,
            context_cap: 64,
            max_len: 20,
            batch_size: 32,
            epochs: EXPERIMENT_EPOCHS,
            eval_every: 112,
            seeds: EXPERIMENT_SEEDS.to_vec(),
            embedding_file: Some(data_dir().join("embeddings.txt")),
            ..TrainingConfig::default()
        };
        let data = Dataset::from_dialogues(&dialogues, &base);
        let table = load_embeddings(&data_dir().join("embeddings.txt"), Some(&data.vocab)).unwrap();
        Self { data, table, base }
    }

    fn run(&self, alpha: f64, p_drop: f64, seeds: &[u64]) -> Vec<RunRecord> {
        let cfg = TrainingConfig {
            alpha,
            p_drop,
            seeds: seeds.to_vec(),
            ..self.base.clone()
        };
        train_seeds(&cfg, &self.data, Some(&self.table), &RunOptions::default())
            .into_iter()
            .map(|r| r.map(|o| o.record).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()
            .unwrap()
    }
}

fn final_pair(r: &RunRecord) -> (f64, f64) {
    let m = r.final_metrics().unwrap();
    (m.distinct2(), m.unseen_fraction())
}

fn ac6(mle: &[RunRecord], sem: &[RunRecord], took: Duration) -> Outcome {
    let mut wins = 0;
    let mut rows = Vec::new();
    let (mut d0, mut d1, mut u0, mut u1) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in mle.iter().zip(sem) {
        let (da, ua) = final_pair(a);
        let (db, ub) = final_pair(b);
        if db > da && ub > ua {
            wins += 1;
        }
        rows.push(format!("seed {}: d2 {da:.4}->{db:.4} unseen {ua:.4}->{ub:.4}", a.seed));
        d0 += da / 3.0;
        d1 += db / 3.0;
        u0 += ua / 3.0;
        u1 += ub / 3.0;
    }
    let budget = Duration::from_secs(15 * 60);
    let msg = format!(
        "mean d2 {d0:.4} (α=0) vs {d1:.4} (α=0.1), mean unseen {u0:.4} vs {u1:.4}, {wins}/3 pairings [{}], {:.0} s of {} s",
        rows.join("; "),
        took.as_secs_f64(),
        budget.as_secs()
    );
    if d1 > d0 && u1 > 0.0 && u1 > u0 && wins >= 2 && took <= budget {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac7(exp: &Experiment, baseline: &RunRecord) -> Outcome {
    let dropped = exp.run(0.1, 0.3, &[baseline.seed]).remove(0);
    let at: BTreeMap<u64, f64> = baseline
        .metrics
        .iter()
        .map(|(s, m)| (*s, m.unseen_fraction()))
        .collect();
    let matched: Vec<(u64, f64, f64)> = dropped
        .metrics
        .iter()
        .filter_map(|(s, m)| at.get(s).map(|b| (*s, *b, m.unseen_fraction())))
        .collect();
    let k = matched.len() as f64;
    let base_mean = matched.iter().map(|m| m.1).sum::<f64>() / k;
    let drop_mean = matched.iter().map(|m| m.2).sum::<f64>() / k;
    let higher = matched.iter().filter(|m| m.2 > m.1).count();
    let exploration = drop_mean > base_mean;

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_semloss"))
        .args(["train", "--out-dir"])
        .arg(&out)
        .arg("--corpus")
        .arg(data_dir().join("corpus.jsonl"))
        .arg("--embedding-file")
        .arg(data_dir().join("embeddings.txt"))
        .args(["--alpha", "0.1", "--p-drop", "0.7", "--seeds", "1", "--epochs", "6"])
        .args([
            "--hidden-size",
            "32",
            "--embedding-size",
            "32",
            "--context-cap",
            "64",
            "--max-len",
            "20",
        ])
        .args(["--eval-every", "56"])
        .output()
        .unwrap();
    let code = status.status.code();
    let ck = out.join("seed-1").join("checkpoint.json");
    let preserved = Checkpoint::load(&ck).and_then(|c| c.to_model()).is_ok();
    let fired = code == Some(1) && preserved;

    let msg = format!(
        "p_drop 0.3 unseen mean {drop_mean:.4} vs {base_mean:.4} over {} matched steps (higher at {higher}); \
         p_drop 0.7 CLI run exit {code:?}, checkpoint preserved {preserved}",
        matched.len()
    );
    if exploration && fired {
        Ok(msg)
    } else {
        let mut why = Vec::new();
        if !exploration {
            why.push("masking did not raise unseen");
        }
        if !fired {
            why.push("divergence detector did not fire");
        }
        Err(format!("{}; {msg}", why.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// AC8

fn train_small(dir: &Path, alpha: &str) -> PathBuf {
    let status = Command::new(env!("CARGO_BIN_EXE_semloss"))
        .args(["train", "--out-dir"])
        .arg(dir)
        .arg("--corpus")
        .arg(data_dir().join("corpus.jsonl"))
        .arg("--embedding-file")
        .arg(data_dir().join("embeddings.txt"))
        .args([
            "--alpha",
            alpha,
            "--seeds",
            "1",
            "--max-steps",
            "40",
            "--eval-every",
            "40",
        ])
        .args([
            "--hidden-size",
            "16",
            "--embedding-size",
            "16",
            "--context-cap",
            "64",
            "--max-len",
            "20",
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "training for the beam check failed");
    dir.join("seed-1").join("checkpoint.json")
}

fn ac8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = train_small(&dir.path().join("mle"), "0");
    let b = train_small(&dir.path().join("sem"), "0.1");
    let (dialogues, _) = load_corpus(&data_dir().join("corpus.jsonl")).unwrap();
    let contexts: Vec<String> = dialogues
        .iter()
        .take(6)
        .map(|d| {
            d.turns[..3]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join("\t")
        })
        .collect();
    let ctx_file = dir.path().join("contexts.txt");
    std::fs::write(&ctx_file, contexts.join("\n") + "\n").unwrap();
    let out_file = dir.path().join("beams.txt");
    let st = Command::new(env!("CARGO_BIN_EXE_semloss"))
        .arg("compare-beams")
        .arg("--checkpoint-a")
        .arg(&a)
        .arg("--checkpoint-b")
        .arg(&b)
        .arg("--contexts")
        .arg(&ctx_file)
        .arg("--out")
        .arg(&out_file)
        .args(["--label-a", "MLE", "--label-b", "SEM", "--beam-width", "5"])
        .status()
        .unwrap();
    if !st.success() {
        return Err(format!("compare-beams exited {st}"));
    }
    let text = std::fs::read_to_string(&out_file).unwrap();
    let mut blocks: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        if line == "  MLE" || line == "  SEM" {
            blocks.push(Vec::new());
        } else if let Some(rest) = line.strip_prefix("    ") {
            let score: f64 = rest.split('\t').nth(1).unwrap().parse().unwrap();
            blocks.last_mut().unwrap().push(score);
        }
    }
    if blocks.len() != 2 * contexts.len() {
        return Err(format!("{} beam blocks for {} contexts", blocks.len(), contexts.len()));
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.len() != 5 {
            return Err(format!("block {i} has {} hypotheses", b.len()));
        }
        if b.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("block {i} scores increase: {b:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut checked = 0;
    for path in [&a, &b] {
        let model = Checkpoint::load(path).unwrap().to_model().unwrap();
        let v = model.vocab_size();
        for _ in 0..100 {
            let len = rng.random_range(1..25);
            let ctx: Vec<TokenId> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        SEP
                    } else {
                        rng.random_range(5..v)
                    }
                })
                .collect();
            let beam = beam_search(&model, &ctx, 1, 20).unwrap();
            if beam[0].tokens != greedy_decode(&model, &ctx, 20).unwrap() {
                return Err(format!("beam-1 differs from greedy on {ctx:?}"));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{} contexts x 2 models x 5 ranked hypotheses; beam-1 = greedy on {checked} random contexts",
        contexts.len()
    ))
}

// ---------------------------------------------------------------------------
// AC9

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for trial in 0..200 {
        let c = random_corpus(&mut rng);
        let mut stats = BigramStats::new();
        for r in &c {
            stats.add_sentence(&real(r));
        }
        let want = if stats.unique() == 0 {
            0.0
        } else {
            stats.total() as f64 / stats.unique() as f64
        };
        if stats.average_occurrence() != want {
            return Err(format!("corpus {trial}: {} vs {want}", stats.average_occurrence()));
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_semloss"))
        .arg("prepare")
        .arg("--corpus")
        .arg(data_dir().join("corpus.jsonl"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    if !st.status.success() {
        return Err("prepare failed on the bundled corpus".into());
    }
    let tsv = std::fs::read_to_string(dir.path().join("bigram_stats.tsv")).unwrap();
    let mut rows = Vec::new();
    for line in tsv.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let (u, t, avg): (u64, u64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        if avg != t as f64 / u as f64 {
            return Err(format!("{}: {avg} != {t}/{u}", f[0]));
        }
        rows.push(format!("{} {avg:.2}", f[0]));
    }
    Ok(format!(
        "200 random corpora exact; bundled corpus {}; Frames comparison not run (data not bundled)",
        rows.join(", ")
    ))
}

// ---------------------------------------------------------------------------

fn report(id: &str, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let why = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {why}"))
    });
    match r {
        Ok(m) => {
            println!("{id} PASS {title}: {m}");
            true
        }
        Err(m) => {
            println!("{id} FAIL {title}: {m}");
            false
        }
    }
}

fn main() {
    let only: Option<String> = std::env::var("SEMLOSS_ACCEPTANCE_ONLY").ok();
    let wanted = |id: &str| only.as_deref().is_none_or(|o| o.split(',').any(|x| x == id));
    let mut failed = 0;
    let mut check = |id: &str, title: &str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(id) && !report(id, title, f) {
            failed += 1;
        }
    };
    check("AC1", "gradient fidelity", &mut ac1);
    check("AC2", "REINFORCE unbiasedness", &mut ac2);
    check("AC3", "alpha=0 equivalence", &mut ac3);
    check("AC4", "metric oracles", &mut ac4);
    check("AC5", "d_sem properties", &mut ac5);

    if wanted("AC6") || wanted("AC7") {
        let start = Instant::now();
        let runs = catch_unwind(|| {
            let exp = Experiment::load();
            let mle = exp.run(0.0, 0.0, &EXPERIMENT_SEEDS);
            let sem = exp.run(0.1, 0.0, &EXPERIMENT_SEEDS);
            (exp, mle, sem)
        });
        let took = start.elapsed();
        match runs {
            Ok((exp, mle, sem)) => {
                check("AC6", "directional diversity", &mut || ac6(&mle, &sem, took));
                check("AC7", "vocabulary-masking exploration", &mut || ac7(&exp, &sem[0]));
            }
            Err(_) => {
                check("AC6", "directional diversity", &mut || {
                    Err("experiment runs failed".into())
                });
                check("AC7", "vocabulary-masking exploration", &mut || {
                    Err("experiment runs failed".into())
                });
            }
        }
    }
    check("AC8", "beam comparison harness", &mut ac8);
    check("AC9", "bigram statistics consistency", &mut ac9);

    if failed > 0 && std::env::var("SEMLOSS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
