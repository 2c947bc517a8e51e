//! Criterion benchmarks for the `nehd` kernels live in `benches/`.
