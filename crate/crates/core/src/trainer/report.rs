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

//! Per-run and seed-averaged CSV files and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{RunRecord, TrainError};
use crate::metrics::{MetricsReport, METRICS_CSV_HEADER};
use crate::objectives::LossBreakdown;

pub const LOSSES_CSV_HEADER: &str = "step,mle_loss,sem_loss,d_sem,advantage,alpha,total";

type Column = (&'static str, fn(&MetricsReport) -> f64);

const METRICS: [Column; 6] = [
    ("bleu", |m| m.bleu),
    ("distinct1", MetricsReport::distinct1),
    ("distinct2", MetricsReport::distinct2),
    ("unseen_frac", MetricsReport::unseen_fraction),
    ("word_repeat_frac", MetricsReport::word_repeat_fraction),
    ("mean_d_sem", MetricsReport::mean_d_sem),
];

pub fn metrics_csv(record: &RunRecord) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for (step, m) in &record.metrics {
        s.push_str(&m.csv_row(*step));
        s.push('\n');
    }
    s
}

fn loss_row(step: u64, b: &LossBreakdown) -> String {
    format!(
        "{step},{},{},{},{},{},{}",
        b.mle_loss, b.sem_loss, b.d_sem, b.advantage, b.alpha, b.total
    )
}

pub fn losses_csv(record: &RunRecord) -> String {
    let mut s = format!("{LOSSES_CSV_HEADER}\n");
    for (step, b) in &record.losses {
        s.push_str(&loss_row(*step, b));
        s.push('\n');
    }
    s
}

/// Per step: how many runs reported it, then mean/min/max of each metric.
fn aggregate(records: &[RunRecord]) -> BTreeMap<u64, Vec<[f64; 6]>> {
    let mut by_step: BTreeMap<u64, Vec<[f64; 6]>> = BTreeMap::new();
    for r in records {
        for (step, m) in &r.metrics {
            let row = METRICS.map(|(_, f)| f(m));
            by_step.entry(*step).or_default().push(row);
        }
    }
    by_step
}

fn mean_min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

pub fn mean_csv(records: &[RunRecord]) -> String {
    let mut s = String::from("step,runs");
    for (name, _) in METRICS {
        write!(s, ",{name}_mean,{name}_min,{name}_max").expect("string write");
    }
    s.push('\n');
    for (step, rows) in aggregate(records) {
        write!(s, "{step},{}", rows.len()).expect("string write");
        for k in 0..METRICS.len() {
            let (mean, min, max) = mean_min_max(rows.iter().map(|r| r[k]));
            write!(s, ",{mean},{min},{max}").expect("string write");
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// Line chart of one metric: a thin line per run and a thick mean line.
pub fn metric_svg(records: &[RunRecord], metric: usize) -> String {
    let (name, f) = METRICS[metric];
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 20.0, 30.0, 40.0);
    let series: Vec<(u64, Vec<(f64, f64)>)> = records
        .iter()
        .map(|r| (r.seed, r.metrics.iter().map(|(s, m)| (*s as f64, f(m))).collect()))
        .collect();
    let mean: Vec<(f64, f64)> = aggregate(records)
        .into_iter()
        .map(|(s, rows)| (s as f64, mean_min_max(rows.iter().map(|r| r[metric])).0))
        .collect();
    let points = || series.iter().flat_map(|(_, p)| p.iter().copied());
    let x_min = points().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_max = points().map(|p| p.1).fold(0.0, f64::max);
    let (x_min, x_max) = if x_min.is_finite() {
        (x_min, x_max.max(x_min + 1.0))
    } else {
        (0.0, 1.0)
    };
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let px = |x: f64| left + (x - x_min) / (x_max - x_min) * (w - left - right);
    let py = |y: f64| h - bottom - y / y_max * (h - top - bottom);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .expect("string write");
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).expect("string write");
    writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{name}</text>"#,
        w / 2.0
    )
    .expect("string write");
    let (x0, y0, x1, y1) = (left, h - bottom, w - right, top);
    writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    )
    .expect("string write");
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x_min + t * (x_max - x_min), t * y_max);
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{:.0}</text>"#,
            px(xv),
            y0 + 15.0,
            xv
        )
        .expect("string write");
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
            x0 - 5.0,
            py(yv) + 3.0,
            yv
        )
        .expect("string write");
    }
    let polyline = |pts: &[(f64, f64)], colour: &str, width: f64| -> String {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        format!(
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"/>"#,
            coords.join(" ")
        )
    };
    for (i, (seed, pts)) in series.iter().enumerate() {
        writeln!(
            s,
            "<g><title>seed {seed}</title>{}</g>",
            polyline(pts, PALETTE[i % PALETTE.len()], 1.0)
        )
        .expect("string write");
    }
    if records.len() > 1 {
        writeln!(s, "<g><title>mean</title>{}</g>", polyline(&mean, "black", 2.5)).expect("string write");
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), TrainError> {
    std::fs::write(&path, contents).map_err(|e| TrainError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Write `metrics_seed<k>.csv`, `losses_seed<k>.csv`, `metrics_mean.csv`
/// and one `chart_<metric>.svg` per metric. Returns the paths written.
pub fn emit_reports(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>, TrainError> {
    std::fs::create_dir_all(out_dir).map_err(|e| TrainError::io(out_dir, e))?;
    let mut written = Vec::new();
    for r in records {
        write(
            out_dir.join(format!("metrics_seed{}.csv", r.seed)),
            &metrics_csv(r),
            &mut written,
        )?;
        write(
            out_dir.join(format!("losses_seed{}.csv", r.seed)),
            &losses_csv(r),
            &mut written,
        )?;
    }
    write(out_dir.join("metrics_mean.csv"), &mean_csv(records), &mut written)?;
    for (k, (name, _)) in METRICS.iter().enumerate() {
        write(
            out_dir.join(format!("chart_{name}.svg")),
            &metric_svg(records, k),
            &mut written,
        )?;
    }
    Ok(written)
}
