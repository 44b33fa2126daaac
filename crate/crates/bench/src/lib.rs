//! Criterion benchmarks for the sensor pipeline; see `benches/pipeline.rs`.
