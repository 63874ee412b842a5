use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use newsrag::chunker::{self, ChunkPolicy};
use newsrag::embed::{DeterministicEmbedder, Embedder};
use newsrag::prompt;
use newsrag_bench::document;

fn chunking(c: &mut Criterion) {
    let mut g = c.benchmark_group("chunk");
    let policy = ChunkPolicy::new(1000, 200).unwrap();
    for chars in [10_000usize, 100_000] {
        let doc = document(1, chars);
        g.throughput(Throughput::Bytes(doc.page_content.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(chars), &doc, |b, d| {
            b.iter(|| chunker::split(black_box(d), &policy).unwrap())
        });
    }
    g.finish();
}

fn embedding(c: &mut Criterion) {
    let mut g = c.benchmark_group("embed_deterministic");
    let e = DeterministicEmbedder::new(768).unwrap();
    let doc = document(2, 40_000);
    let chunks = chunker::split(&doc, &ChunkPolicy::new(1000, 200).unwrap()).unwrap();
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    g.bench_function("one_chunk", |b| b.iter(|| e.embed_text(black_box(texts[0])).unwrap()));
    g.throughput(Throughput::Elements(texts.len() as u64));
    g.bench_function("batch", |b| b.iter(|| e.embed_batch(black_box(&texts)).unwrap()));
    g.finish();
}

fn prompts(c: &mut Criterion) {
    let doc = document(3, 5_000);
    let chunks = chunker::split(&doc, &ChunkPolicy::new(1000, 200).unwrap()).unwrap();
    let contexts: Vec<&str> = chunks.iter().take(4).map(|c| c.text.as_str()).collect();
    c.bench_function("prompt_render_k4", |b| {
        b.iter(|| prompt::render_with_context(black_box("What did the senator say?"), black_box(&contexts)))
    });
}

criterion_group!(benches, chunking, embedding, prompts);
criterion_main!(benches);
