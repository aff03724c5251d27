//! Criterion benchmarks for the analyzer and the oracle; see `benches/`.
