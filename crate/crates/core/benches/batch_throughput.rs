//! Compares the data-parallel batch paths against their sequential
//! fallbacks for featurization and prediction.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use askwhen_core::curate::{LabeledQuery, Provenance, QuerySource, TrainingSet};
use askwhen_core::model::{
    featurize_batch, featurize_batch_seq, predict_batch, predict_batch_seq, train, ClassifierModel,
    FeaturizerConfig, TrainConfig,
};
use askwhen_core::Label;

fn synthetic_queries(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                format!(
                    "what is the exact shipment date for order {i} from warehouse {}",
                    i % 17
                )
            } else {
                format!("tell me about the thing {i} and related stuff {}", i % 13)
            }
        })
        .collect()
}

fn fitted_model(queries: &[String]) -> ClassifierModel {
    let items = queries
        .iter()
        .enumerate()
        .map(|(i, q)| LabeledQuery {
            query_text: q.clone(),
            label: if i % 2 == 0 {
                Label::Specific
            } else {
                Label::Ambiguous
            },
            source: QuerySource::Synthetic,
            record_id: format!("r{i:06}"),
        })
        .collect();
    let set = TrainingSet {
        items,
        provenance: Provenance::default(),
    };
    let config = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    train(&set, &config, &FeaturizerConfig::default()).expect("bench corpus trains")
}

fn bench_featurize(c: &mut Criterion) {
    let features = FeaturizerConfig::default();
    let mut group = c.benchmark_group("featurize_batch");
    for &size in &[256usize, 2048] {
        let queries = synthetic_queries(size);
        group.throughput(Throughput::Elements(size as u64));
        group.bench_with_input(BenchmarkId::new("parallel", size), &queries, |b, q| {
            b.iter(|| featurize_batch(q, &features))
        });
        group.bench_with_input(BenchmarkId::new("sequential", size), &queries, |b, q| {
            b.iter(|| featurize_batch_seq(q, &features))
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let queries = synthetic_queries(2048);
    let model = fitted_model(&queries[..512]);
    let mut group = c.benchmark_group("predict_batch");
    for &size in &[256usize, 2048] {
        let batch = &queries[..size];
        group.throughput(Throughput::Elements(size as u64));
        group.bench_with_input(BenchmarkId::new("parallel", size), &batch, |b, q| {
            b.iter(|| predict_batch(&model, q))
        });
        group.bench_with_input(BenchmarkId::new("sequential", size), &batch, |b, q| {
            b.iter(|| predict_batch_seq(&model, q))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_featurize, bench_predict);
criterion_main!(benches);
