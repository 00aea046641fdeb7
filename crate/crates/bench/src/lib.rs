//! Benchmark support crate; see `benches/fgt.rs`.
