use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};
use resbound::fixpoint::{analyze, AnalysisOptions};
use resbound::frontend::parse_program;
use resbound::oracle::check_entry;
use resbound::regtypes::TypeGrammar;

fn corpus() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pl"))
        .map(|p| {
            (
                p.file_stem().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn analysis(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    for (name, src) in corpus() {
        let prog = parse_program(&src).unwrap();
        group.bench_function(&name, |b| {
            b.iter(|| analyze(black_box(&prog), &AnalysisOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("check");
    group.sample_size(10);
    for (name, src) in corpus() {
        let prog = parse_program(&src).unwrap();
        let r = analyze(&prog, &AnalysisOptions::default()).unwrap();
        let g = TypeGrammar::from_program(&prog);
        let entry = r.entries.iter().find(|e| e.entry).unwrap();
        group.bench_function(&name, |b| {
            b.iter(|| check_entry(&prog, &r.resources, entry, &g, 8, 20, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, analysis, oracle);
criterion_main!(benches);
