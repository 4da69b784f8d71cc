use std::sync::Arc;

use ces_bench::prepared;
use ces_core::depgraph::EdgeDirection;
use ces_core::model::{
    build_pos_vocab, example_loss, infer_logits, register, sage_layer, ModelConfig, Params,
};
use ces_core::ndcore::{Mode, Tape, Tensor};
use ces_core::rng::stream;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn sage(c: &mut Criterion) {
    let config = ModelConfig::default();
    let example = &prepared(1, &config)[0];
    let n = example.embeddings.rows();
    let neighbors = Arc::new(example.graph.in_neighbors(EdgeDirection::HeadToTail));
    let x: Tensor<f32> = Tensor::zeros(&[n, config.gnn_input_dim()]);
    let params = Params::<f32>::init(&config, 1);
    c.bench_function("sage_layer/first", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let vars = register(&mut tape, &params);
            let layer = vars.sage1.expect("graph layers enabled");
            let xv = tape.constant(x.clone());
            let out = sage_layer(&mut tape, xv, &neighbors, &layer).unwrap();
            black_box(tape.value(out).rows())
        })
    });
}

fn full_model(c: &mut Criterion) {
    let config = ModelConfig::default();
    let examples = prepared(4, &config);
    let vocab = build_pos_vocab(&examples, &config).unwrap();
    let input = examples[0].encode(&vocab, &config);
    let targets = examples[0].targets();
    let params = Params::<f32>::init(&config, 1);
    let mut group = c.benchmark_group("model");
    group.sample_size(20);
    group.bench_function("inference", |b| b.iter(|| infer_logits(&params, &config, black_box(&input)).unwrap()));
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let vars = register(&mut tape, &params);
            let mut rng = stream(3, "bench");
            let loss = example_loss(&mut tape, &vars, &config, &input, &targets, Mode::Train, &mut rng).unwrap();
            black_box(tape.backward(loss).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, sage, full_model);
criterion_main!(benches);
