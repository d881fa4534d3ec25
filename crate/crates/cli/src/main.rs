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

//! `semloss` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime failure or divergence, 2 usage or
//! configuration error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "semloss",
    version,
    about = "Train and evaluate dialogue generators with a semantic loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vocabulary, train/validation pair files and bigram statistics.
    Prepare(PrepareArgs),
    /// Train one model per configured seed and write reports.
    Train(TrainArgs),
    /// Score a checkpoint on a corpus split.
    Eval(EvalArgs),
    /// Decode responses for contexts read one per line.
    Generate(GenerateArgs),
    /// Write the beams of two checkpoints side by side.
    CompareBeams(CompareArgs),
    /// Train across log-spaced alpha values in [0.01, 100].
    Sweep(SweepArgs),
    /// Write the bundled synthetic corpus and embedding table.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Corpus in JSON-lines format.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, default_value_t = 256)]
    context_cap: usize,
    #[arg(long, default_value_t = 0.1)]
    valid_fraction: f64,
}

/// Flags mirroring the configuration keys; each takes precedence over the file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    hidden_size: Option<String>,
    #[arg(long)]
    embedding_size: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Stop after this many optimizer steps (0 = no cap).
    #[arg(long)]
    max_steps: Option<String>,
    /// Comma-separated list of seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Probability of masking each vocabulary entry before sampling.
    #[arg(long)]
    p_drop: Option<String>,
    #[arg(long)]
    baseline_window: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    /// Word-vector table ("token v1 ... vd" per line).
    #[arg(long)]
    embedding_file: Option<String>,
    /// random or from-table.
    #[arg(long)]
    init_mode: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    #[arg(long)]
    context_cap: Option<String>,
    #[arg(long)]
    min_count: Option<String>,
    #[arg(long)]
    valid_fraction: Option<String>,
    #[arg(long)]
    divergence_window: Option<String>,
    #[arg(long)]
    divergence_factor: Option<String>,
    /// Corpus in JSON-lines format.
    #[arg(long)]
    corpus: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("alpha", &self.alpha),
            ("learning-rate", &self.learning_rate),
            ("hidden-size", &self.hidden_size),
            ("embedding-size", &self.embedding_size),
            ("batch-size", &self.batch_size),
            ("epochs", &self.epochs),
            ("max-steps", &self.max_steps),
            ("seeds", &self.seeds),
            ("p-drop", &self.p_drop),
            ("baseline-window", &self.baseline_window),
            ("eval-every", &self.eval_every),
            ("embedding-file", &self.embedding_file),
            ("init-mode", &self.init_mode),
            ("max-len", &self.max_len),
            ("context-cap", &self.context_cap),
            ("min-count", &self.min_count),
            ("valid-fraction", &self.valid_fraction),
            ("divergence-window", &self.divergence_window),
            ("divergence-factor", &self.divergence_factor),
            ("corpus", &self.corpus),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for checkpoints, reports and the manifest.
    #[arg(long)]
    out_dir: PathBuf,
    /// Run everything on one thread.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Valid,
    Train,
    All,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Word-vector table for the mean d_sem column.
    #[arg(long)]
    embedding_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "valid")]
    split: Split,
    /// Also write the report as a metrics CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    max_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Greedy,
    Sample,
    Beam,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Contexts, one per line with turns separated by tabs; stdin if absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "greedy")]
    mode: Mode,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    /// Seed for sample mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    checkpoint_a: PathBuf,
    #[arg(long)]
    checkpoint_b: PathBuf,
    /// Contexts, one per line with turns separated by tabs.
    #[arg(long)]
    contexts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    #[arg(long, default_value = "A")]
    label_a: String,
    #[arg(long, default_value = "B")]
    label_b: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of alpha values.
    #[arg(long, default_value_t = 9)]
    points: usize,
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    dialogues: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    embedding_dim: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Generate(a) => commands::generate(a),
        Command::CompareBeams(a) => commands::compare_beams(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
