//! Benchmark-only crate; the measured code lives in `benches/`.
