//! Criterion benchmarks for snls-core live in `benches/`.
