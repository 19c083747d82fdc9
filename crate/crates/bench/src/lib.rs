//! Criterion benchmarks for the trial hot path; see `benches/`.
