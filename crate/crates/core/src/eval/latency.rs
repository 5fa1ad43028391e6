//! Sequential per-query latency benchmarking with nearest-rank percentiles.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LatencyError<E> {
    #[error("no queries to benchmark")]
    EmptyQueries,
    #[error("warmup count {warmup} must be smaller than query count {queries}")]
    WarmupTooLarge { warmup: usize, queries: usize },
    #[error("predictor failed during benchmark: {0}")]
    Predictor(E),
}

/// Wall-clock timing summary over one benchmark run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LatencyReport {
    pub mean_seconds_per_query: f64,
    pub p50: f64,
    pub p95: f64,
    pub n: usize,
    pub warmup_excluded: usize,
}

fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = (percentile / 100.0 * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Times `predict` on each query in order, one call at a time on the calling
/// thread. The first `warmup` calls run against the first query and their
/// timings are discarded; every query in `queries` is then timed once.
pub fn bench_latency<R, E>(
    queries: &[String],
    warmup: usize,
    mut predict: impl FnMut(&str) -> Result<R, E>,
) -> Result<LatencyReport, LatencyError<E>> {
    if queries.is_empty() {
        return Err(LatencyError::EmptyQueries);
    }
    if warmup >= queries.len() {
        return Err(LatencyError::WarmupTooLarge {
            warmup,
            queries: queries.len(),
        });
    }

    for _ in 0..warmup {
        let start = Instant::now();
        predict(&queries[0]).map_err(LatencyError::Predictor)?;
        let _ = start.elapsed();
    }

    let mut timings = Vec::with_capacity(queries.len());
    for query in queries {
        let start = Instant::now();
        predict(query).map_err(LatencyError::Predictor)?;
        timings.push(start.elapsed().as_secs_f64());
    }

    let mean = timings.iter().sum::<f64>() / timings.len() as f64;
    let mut sorted = timings.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));

    Ok(LatencyReport {
        mean_seconds_per_query: mean,
        p50: nearest_rank(&sorted, 50.0),
        p95: nearest_rank(&sorted, 95.0),
        n: timings.len(),
        warmup_excluded: warmup,
    })
}
