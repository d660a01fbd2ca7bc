use criterion::{criterion_group, criterion_main, Criterion};
use sovc_core::model::{batch_gradients, CaptionModel, DecodeMode, ModelConfig, TrainConfig, Trainer};
use sovc_core::pipeline::{build_examples, build_vocabulary};
use sovc_core::sampler::SamplerConfig;
use sovc_core::synthetic::{write_synthetic_dataset, SyntheticSpec};

fn model(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let ds = write_synthetic_dataset(dir.path(), &SyntheticSpec::default()).unwrap();
    let model = CaptionModel::new(ModelConfig::test_scale(), build_vocabulary(&ds, 1), 7).unwrap();
    let examples = build_examples(&ds, &model, &SamplerConfig::default()).unwrap();

    let mut g = c.benchmark_group("model_test_scale");
    g.bench_function("greedy_caption", |b| b.iter(|| model.caption(&examples[0].input, DecodeMode::Greedy).unwrap()));
    g.bench_function("beam3_caption", |b| b.iter(|| model.caption(&examples[0].input, DecodeMode::Beam(3)).unwrap()));
    g.bench_function("gradients_batch16", |b| b.iter(|| batch_gradients(&model, &examples).unwrap()));
    let mut trainer = Trainer::new(model.clone(), TrainConfig::default()).unwrap();
    g.bench_function("train_step_batch16", |b| b.iter(|| trainer.train_step(&examples).unwrap()));
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = model
}
criterion_main!(benches);
