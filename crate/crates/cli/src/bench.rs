//! Repeated query timing grouped by result size.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Result;
use serde_json::json;

use subtree_index::corpus::DataFile;
use subtree_index::decompose::plan_query_with;
use subtree_index::exec::execute_plan;
use subtree_index::{QueryNode, SubtreeIndex};

use crate::report::{emit, Format, Table};

/// Result-size bins: below 10, below 100, and so on, then the rest.
pub const BINS: [&str; 5] = ["<10", "10-100", "100-1k", "1k-10k", ">10k"];

pub fn bin_of(matches: usize) -> usize {
    match matches {
        0..=9 => 0,
        10..=99 => 1,
        100..=999 => 2,
        1000..=9999 => 3,
        _ => 4,
    }
}

pub struct Row {
    pub query: String,
    pub matches: usize,
    /// Milliseconds per repetition, decomposition included.
    pub latencies: Vec<f64>,
}

impl Row {
    fn mean(&self) -> f64 {
        self.latencies.iter().sum::<f64>() / self.latencies.len() as f64
    }
}

fn time_one(idx: &SubtreeIndex, df: Option<&DataFile>, q: &QueryNode, reps: usize) -> Result<Row> {
    let mut latencies = Vec::with_capacity(reps);
    let mut matches = 0;
    for _ in 0..reps {
        let t0 = Instant::now();
        let plan = plan_query_with(q, idx.mss(), idx.scheme(), idx)?;
        matches = execute_plan(&plan, idx, df)?.len();
        latencies.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok(Row {
        query: q.to_string(),
        matches,
        latencies,
    })
}

/// Times every query `reps` times on `threads` workers. Rows come back in
/// query order.
pub fn run(idx: &SubtreeIndex, df: Option<&DataFile>, qs: &[QueryNode], reps: usize, threads: usize) -> Result<Vec<Row>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Row>>>> = Mutex::new((0..qs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.min(qs.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= qs.len() {
                    break;
                }
                let r = time_one(idx, df, &qs[i], reps);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn report(idx: &SubtreeIndex, rows: &[Row], format: Format) -> std::io::Result<()> {
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    let mut bins = Table::new("latency_ms", &["scheme", "mss", "bin", "queries", "mean", "p50", "p90", "max"]);
    let head = || [json!(idx.scheme().name()), json!(idx.mss())];
    for (b, name) in BINS.iter().enumerate() {
        let in_bin: Vec<&Row> = rows.iter().filter(|r| bin_of(r.matches) == b).collect();
        if in_bin.is_empty() {
            let mut r = head().to_vec();
            r.extend([json!(name), json!(0), json!(null), json!(null), json!(null), json!(null)]);
            bins.row(r);
            continue;
        }
        let mut all: Vec<f64> = in_bin.iter().flat_map(|r| r.latencies.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        let mean = in_bin.iter().map(|r| r.mean()).sum::<f64>() / in_bin.len() as f64;
        let mut r = head().to_vec();
        r.extend([
            json!(name),
            json!(in_bin.len()),
            json!(round(mean)),
            json!(round(percentile(&all, 0.5))),
            json!(round(percentile(&all, 0.9))),
            json!(round(*all.last().unwrap())),
        ]);
        bins.row(r);
    }
    let mut per = Table::new("query", &["query", "matches", "bin", "mean_ms"]);
    per.records_only = true;
    for r in rows {
        per.row(vec![json!(r.query), json!(r.matches), json!(BINS[bin_of(r.matches)]), json!(round(r.mean()))]);
    }
    emit(&[bins, per], format)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_and_percentiles() {
        assert_eq!([0, 9, 10, 99, 100, 999, 1000, 9999, 10000].map(bin_of), [0, 0, 1, 1, 2, 2, 3, 3, 4]);
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.9), 4.0);
        assert_eq!(percentile(&v[..1], 0.5), 1.0);
    }
}
