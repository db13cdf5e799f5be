//! Criterion benchmarks for the hot numerical paths live in `benches/`;
//! this crate has no library code of its own.
