use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use supdec::pipeline::{decompile, run, Options};
use supdec::provenance::SemiringTag;
use supdec_bench::corpus;

fn passes_by_semiring(c: &mut Criterion) {
    let listing = corpus().into_iter().find(|(n, _)| *n == "classify").unwrap().1;
    let mut g = c.benchmark_group("classify_passes");
    for tag in [SemiringTag::Bool, SemiringTag::Count, SemiringTag::Prov] {
        let opts = Options { semiring: tag, ..Options::default() };
        g.bench_with_input(BenchmarkId::from_parameter(tag), &opts, |b, o| b.iter(|| run(listing, None, o).unwrap()));
    }
    g.finish();
}

fn corpus_end_to_end(c: &mut Criterion) {
    let mut g = c.benchmark_group("decompile");
    g.sample_size(20);
    for (name, listing) in corpus() {
        g.bench_function(name, |b| b.iter(|| decompile(listing, None, &Options::default()).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, passes_by_semiring, corpus_end_to_end);
criterion_main!(benches);
