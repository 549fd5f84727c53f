//! Benchmark-only crate; see `benches/inference.rs`.
