//! Criterion benchmarks for the alignment kernels; see the `benches/`
//! directory. The crate itself exports nothing.
