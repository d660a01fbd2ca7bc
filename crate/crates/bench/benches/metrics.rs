use criterion::{criterion_group, criterion_main, Criterion};
use sovc_bench::caption_pairs;
use sovc_core::annotate::{default_blacklist, RuleTagger};
use sovc_core::metrics::{bleu4, cider_d, evaluate, meteor_lite, rouge_l};

fn metrics(c: &mut Criterion) {
    let pairs = caption_pairs(200, 5);
    let mut g = c.benchmark_group("metrics_200x5");
    g.bench_function("bleu4", |b| b.iter(|| bleu4(&pairs)));
    g.bench_function("meteor_lite", |b| b.iter(|| meteor_lite(&pairs)));
    g.bench_function("rouge_l", |b| b.iter(|| rouge_l(&pairs)));
    g.bench_function("cider_d", |b| b.iter(|| cider_d(&pairs)));
    let tagger = RuleTagger::default();
    let blacklist = default_blacklist();
    g.bench_function("evaluate", |b| b.iter(|| evaluate(&pairs, &tagger, &blacklist).unwrap()));
    g.finish();
}

criterion_group!(benches, metrics);
criterion_main!(benches);
