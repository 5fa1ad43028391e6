//! Evaluation: weighted classification metrics and the per-query latency
//! harness.

mod latency;
mod metrics;

pub use latency::{bench_latency, LatencyError, LatencyReport};
pub use metrics::{weighted_metrics, ClassMetrics, Confusion, MetricsError, MetricsReport};
