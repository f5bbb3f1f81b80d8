//! Criterion benchmarks for the surrogate pipeline; see `benches/`.
